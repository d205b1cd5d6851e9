// SPDX-License-Identifier: Apache-2.0
#include "fnndg/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "fnndg/errors.hpp"
#include "fnndg/rng.hpp"
#include "fnndg/text_io.hpp"

namespace fnndg {
namespace {

constexpr std::string_view kScenarioMagic = "fnndg-scenario";
constexpr int kScenarioVersion = 1;

std::vector<double> random_prototype(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-9);
  for (double& x : v) x *= kPrototypeRadius / norm;
  return v;
}

std::vector<double> transform(const DomainSpec& d, std::vector<double> x) {
  for (double& v : x) v *= d.scale;
  const double c = std::cos(d.rotation_angle);
  const double s = std::sin(d.rotation_angle);
  const double x0 = x[0];
  const double x1 = x[1];
  x[0] = c * x0 - s * x1;
  x[1] = s * x0 + c * x1;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += d.translation[i];
  return x;
}

std::string next_line(std::istream& in, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("scenario file truncated before " + std::string(what));
  return line;
}

std::vector<std::string_view> keyed(const std::string& line, std::string_view key,
                                    std::size_t expected_fields) {
  auto f = text::split(line, ',');
  if (f.empty() || f[0] != key || (expected_fields && f.size() != expected_fields)) {
    throw IoError("scenario file: malformed '" + std::string(key) + "' line: " + line);
  }
  return f;
}

}  // namespace

std::vector<std::size_t> Scenario::domain_sample_indices(int domain) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].domain == domain) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Scenario::label_histogram(int domain) const {
  std::vector<std::size_t> h(static_cast<std::size_t>(num_classes), 0);
  for (const Sample& s : samples) {
    if (s.domain == domain) ++h[static_cast<std::size_t>(s.label)];
  }
  return h;
}

Matrix Scenario::domain_inputs(int domain) const {
  const auto idx = domain_sample_indices(domain);
  Matrix m(idx.size(), static_cast<std::size_t>(input_dim));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(samples[idx[r]].features.begin(), samples[idx[r]].features.end(), m.row(r).begin());
  }
  return m;
}

std::vector<int> Scenario::domain_labels(int domain) const {
  std::vector<int> out;
  for (const Sample& s : samples) {
    if (s.domain == domain) out.push_back(s.label);
  }
  return out;
}

Scenario generate_scenario(int num_classes, int input_dim, int n_per_class_per_domain,
                           const std::vector<DomainSpec>& domains, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("scenario needs at least 2 classes");
  if (input_dim < 2) throw ConfigError("scenario needs input dimension >= 2");
  if (n_per_class_per_domain < 1) throw ConfigError("samples per class per domain must be >= 1");
  if (domains.empty()) throw ConfigError("scenario needs at least one domain");

  Scenario sc;
  sc.num_classes = num_classes;
  sc.input_dim = input_dim;
  sc.generation_seed = seed;
  sc.domains = domains;
  for (std::size_t di = 0; di < sc.domains.size(); ++di) {
    DomainSpec& d = sc.domains[di];
    const std::string where = "domain " + std::to_string(di) + ": ";
    if (!(d.scale > 0.0)) throw ConfigError(where + "scale must be positive");
    if (!(d.noise_sigma >= 0.0)) throw ConfigError(where + "noise_sigma must be non-negative");
    if (d.translation.empty()) d.translation.assign(static_cast<std::size_t>(input_dim), 0.0);
    if (d.translation.size() != static_cast<std::size_t>(input_dim)) {
      throw ConfigError(where + "translation length must equal input dimension");
    }
    if (d.present_classes.empty()) {
      for (int c = 0; c < num_classes; ++c) d.present_classes.insert(c);
    }
    for (int c : d.present_classes) {
      if (c < 0 || c >= num_classes) throw ConfigError(where + "class index out of range");
    }
  }

  Rng proto_rng(mix_seed(seed, 0));
  for (int c = 0; c < num_classes; ++c) sc.class_prototypes.push_back(random_prototype(proto_rng, input_dim));

  for (std::size_t di = 0; di < sc.domains.size(); ++di) {
    const DomainSpec& d = sc.domains[di];
    Rng rng(mix_seed(seed, 1 + di));
    for (int c : d.present_classes) {
      for (int i = 0; i < n_per_class_per_domain; ++i) {
        std::vector<double> x = sc.class_prototypes[static_cast<std::size_t>(c)];
        for (double& v : x) v += d.noise_sigma * rng.normal();
        sc.samples.push_back(Sample{transform(d, std::move(x)), c, static_cast<int>(di)});
      }
    }
  }
  return sc;
}

Scenario apply_category_shift(const Scenario& scenario,
                              const std::map<int, std::set<int>>& removed, int target_domain) {
  for (const auto& [domain, classes] : removed) {
    if (domain == target_domain) {
      throw ConfigError("category shift may not modify the target domain " +
                        std::to_string(domain));
    }
    if (domain < 0 || domain >= scenario.num_domains()) {
      throw ConfigError("category shift names unknown domain " + std::to_string(domain));
    }
    const auto& present = scenario.domains[static_cast<std::size_t>(domain)].present_classes;
    std::size_t remaining = 0;
    for (int c : present) remaining += classes.count(c) ? 0 : 1;
    if (remaining == 0) {
      throw ConfigError("category shift would empty domain " + std::to_string(domain));
    }
    for (int c : classes) {
      if (c < 0 || c >= scenario.num_classes) {
        throw ConfigError("category shift names unknown class " + std::to_string(c));
      }
    }
  }

  Scenario out = scenario;
  for (const auto& [domain, classes] : removed) {
    for (int c : classes) out.domains[static_cast<std::size_t>(domain)].present_classes.erase(c);
  }
  std::erase_if(out.samples, [&](const Sample& s) {
    auto it = removed.find(s.domain);
    return it != removed.end() && it->second.count(s.label) > 0;
  });
  return out;
}

std::vector<Batch> make_batches(const Scenario& scenario, const std::vector<int>& sources,
                                std::size_t batch_size, std::uint64_t shuffle_seed) {
  if (sources.empty()) throw ConfigError("make_batches: no source domains");
  if (batch_size == 0 || batch_size % sources.size() != 0) {
    throw ConfigError("batch size " + std::to_string(batch_size) +
                      " is not divisible by the number of source domains (" +
                      std::to_string(sources.size()) + ")");
  }
  const std::size_t per_domain = batch_size / sources.size();

  std::vector<std::vector<std::size_t>> pools;
  std::size_t num_batches = static_cast<std::size_t>(-1);
  for (int domain : sources) {
    if (domain < 0 || domain >= scenario.num_domains()) {
      throw ConfigError("make_batches: unknown domain " + std::to_string(domain));
    }
    auto idx = scenario.domain_sample_indices(domain);
    Rng rng(mix_seed(shuffle_seed, static_cast<std::uint64_t>(domain)));
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    num_batches = std::min(num_batches, idx.size() / per_domain);
    pools.push_back(std::move(idx));
  }

  const auto dim = static_cast<std::size_t>(scenario.input_dim);
  std::vector<Batch> batches;
  batches.reserve(num_batches);
  for (std::size_t b = 0; b < num_batches; ++b) {
    Batch batch;
    Matrix inputs(batch_size, dim);
    std::size_t row = 0;
    for (const auto& pool : pools) {
      for (std::size_t k = 0; k < per_domain; ++k, ++row) {
        const std::size_t si = pool[b * per_domain + k];
        const Sample& s = scenario.samples[si];
        std::copy(s.features.begin(), s.features.end(), inputs.row(row).begin());
        batch.labels.push_back(s.label);
        batch.domain_indices.push_back(s.domain);
        batch.sample_indices.push_back(si);
      }
    }
    batch.inputs = Tensor::constant(std::move(inputs));
    batches.push_back(std::move(batch));
  }
  return batches;
}

void write_scenario(std::ostream& out, const Scenario& sc) {
  using text::format_double;
  out << kScenarioMagic << ',' << kScenarioVersion << '\n';
  out << "K," << sc.num_classes << '\n';
  out << "d," << sc.input_dim << '\n';
  out << "N," << sc.domains.size() << '\n';
  out << "seed," << sc.generation_seed << '\n';
  for (std::size_t c = 0; c < sc.class_prototypes.size(); ++c) {
    out << "prototype," << c;
    for (double v : sc.class_prototypes[c]) out << ',' << format_double(v);
    out << '\n';
  }
  // domain,index,angle,scale,noise_sigma,classes(;-separated),translation...
  for (std::size_t di = 0; di < sc.domains.size(); ++di) {
    const DomainSpec& d = sc.domains[di];
    out << "domain," << di << ',' << format_double(d.rotation_angle) << ','
        << format_double(d.scale) << ',' << format_double(d.noise_sigma) << ',';
    bool first = true;
    for (int c : d.present_classes) {
      out << (first ? "" : ";") << c;
      first = false;
    }
    for (double v : d.translation) out << ',' << format_double(v);
    out << '\n';
  }
  out << "samples," << sc.samples.size() << '\n';
  for (const Sample& s : sc.samples) {
    out << s.domain << ',' << s.label;
    for (double v : s.features) out << ',' << format_double(v);
    out << '\n';
  }
}

Scenario read_scenario(std::istream& in) {
  Scenario sc;
  {
    const auto line = next_line(in, "header");
    auto f = keyed(line, kScenarioMagic, 2);
    if (text::parse_int(f[1]) != kScenarioVersion) throw IoError("unsupported scenario version");
  }
  auto scalar = [&](std::string_view key) {
    const auto line = next_line(in, key);
    return text::parse_int(keyed(line, key, 2)[1]);
  };
  sc.num_classes = static_cast<int>(scalar("K"));
  sc.input_dim = static_cast<int>(scalar("d"));
  const auto num_domains = scalar("N");
  sc.generation_seed = static_cast<std::uint64_t>(scalar("seed"));
  if (sc.num_classes < 2 || sc.input_dim < 2 || num_domains < 1) {
    throw IoError("scenario file: invalid K, d or N");
  }
  const auto d = static_cast<std::size_t>(sc.input_dim);

  for (int c = 0; c < sc.num_classes; ++c) {
    const auto line = next_line(in, "prototype");
    auto f = keyed(line, "prototype", 2 + d);
    if (text::parse_int(f[1]) != c) throw IoError("scenario file: prototypes out of order");
    std::vector<double> p;
    for (std::size_t i = 0; i < d; ++i) p.push_back(text::parse_double(f[2 + i]));
    sc.class_prototypes.push_back(std::move(p));
  }
  for (std::int64_t di = 0; di < num_domains; ++di) {
    const auto line = next_line(in, "domain");
    auto f = keyed(line, "domain", 6 + d);
    if (text::parse_int(f[1]) != di) throw IoError("scenario file: domains out of order");
    DomainSpec spec;
    spec.rotation_angle = text::parse_double(f[2]);
    spec.scale = text::parse_double(f[3]);
    spec.noise_sigma = text::parse_double(f[4]);
    if (!text::trim(f[5]).empty()) {
      for (auto c : text::split(f[5], ';')) spec.present_classes.insert(static_cast<int>(text::parse_int(c)));
    }
    for (std::size_t i = 0; i < d; ++i) spec.translation.push_back(text::parse_double(f[6 + i]));
    sc.domains.push_back(std::move(spec));
  }
  const auto count = static_cast<std::size_t>(text::parse_uint(keyed(next_line(in, "samples"), "samples", 2)[1]));
  sc.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto line = next_line(in, "sample");
    auto f = text::split(line, ',');
    if (f.size() != 2 + d) throw IoError("scenario file: malformed sample line " + std::to_string(i));
    Sample s;
    s.domain = static_cast<int>(text::parse_int(f[0]));
    s.label = static_cast<int>(text::parse_int(f[1]));
    if (s.domain < 0 || s.domain >= num_domains || s.label < 0 || s.label >= sc.num_classes) {
      throw IoError("scenario file: sample " + std::to_string(i) + " has invalid domain or label");
    }
    for (std::size_t k = 0; k < d; ++k) s.features.push_back(text::parse_double(f[2 + k]));
    sc.samples.push_back(std::move(s));
  }
  return sc;
}

void save_scenario(const std::filesystem::path& path, const Scenario& scenario) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scenario file " + path.string());
  write_scenario(out, scenario);
  if (!out) throw IoError("failed writing scenario file " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scenario file " + path.string());
  return read_scenario(in);
}

}  // namespace fnndg
