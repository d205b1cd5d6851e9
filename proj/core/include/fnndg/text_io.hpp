// SPDX-License-Identifier: Apache-2.0
//
// Number formatting shared by every text file the library writes. Doubles are
// printed with 17 significant digits so that reading them back is exact.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fnndg::text {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::uint64_t parse_uint(std::string_view s);

/// Splits on `sep`, keeping empty fields.
std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::string_view trim(std::string_view s);

template <typename Range>
std::string join(const Range& items, std::string_view sep) {
  std::string out;
  bool first = true;
  for (const auto& item : items) {
    if (!first) out += sep;
    out += item;
    first = false;
  }
  return out;
}

}  // namespace fnndg::text
