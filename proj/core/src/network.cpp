// SPDX-License-Identifier: Apache-2.0
#include "fnndg/network.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "fnndg/errors.hpp"
#include "fnndg/ops.hpp"
#include "fnndg/rng.hpp"
#include "fnndg/text_io.hpp"

namespace fnndg {
namespace {

constexpr std::string_view kCheckpointMagic = "fnndg-checkpoint";
constexpr int kCheckpointVersion = 1;

Tensor linear(const Layer& layer, const Tensor& x) {
  return add_bias(matmul(x, layer.weight), layer.bias);
}

std::string next_line(std::istream& in, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint truncated before " + std::string(what));
  return line;
}

std::vector<std::string_view> keyed_line(const std::string& line, std::string_view key) {
  auto fields = text::split_whitespace(line);
  if (fields.empty() || fields.front() != key) {
    throw IoError("checkpoint: expected '" + std::string(key) + "', got '" + line + "'");
  }
  fields.erase(fields.begin());
  return fields;
}

std::uint64_t keyed_uint(std::istream& in, std::string_view key) {
  const std::string line = next_line(in, key);
  auto fields = keyed_line(line, key);
  if (fields.size() != 1) throw IoError("checkpoint: malformed '" + std::string(key) + "'");
  return text::parse_uint(fields[0]);
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim == 0 || feature_dim == 0 || num_classes == 0) {
    throw ConfigError("network dimensions must be positive");
  }
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
}

ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams params;
  params.spec = spec;
  params.init_seed = seed;

  std::vector<std::size_t> widths{spec.input_dim};
  widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  widths.push_back(spec.feature_dim);
  widths.push_back(spec.num_classes);

  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    params.layers.push_back(
        Layer{Tensor::parameter(std::move(w)), Tensor::parameter(Matrix(1, fan_out))});
  }
  return params;
}

Tensor forward_features(const ModelParams& params, const Tensor& x) {
  if (x.cols() != params.spec.input_dim) {
    throw ShapeError("forward_features: input has " + std::to_string(x.cols()) +
                     " columns, network expects " + std::to_string(params.spec.input_dim));
  }
  auto layers = params.feature_layers();
  Tensor h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = linear(layers[l], h);
    if (l + 1 < layers.size()) h = relu(h);
  }
  return h;
}

Tensor forward_logits(const ModelParams& params, const Tensor& features) {
  if (features.cols() != params.spec.feature_dim) {
    throw ShapeError("forward_logits: features have " + std::to_string(features.cols()) +
                     " columns, head expects " + std::to_string(params.spec.feature_dim));
  }
  return linear(params.head(), features);
}

std::vector<Tensor> parameters(const ModelParams& params) {
  std::vector<Tensor> out;
  out.reserve(params.layers.size() * 2);
  for (const Layer& l : params.layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

std::vector<Tensor*> mutable_parameters(ModelParams& params) {
  std::vector<Tensor*> out;
  out.reserve(params.layers.size() * 2);
  for (Layer& l : params.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

ModelParams track(const ModelParams& params, Tape& tape) {
  ModelParams live = params;
  for (Layer& l : live.layers) {
    l.weight = tape.watch(l.weight);
    l.bias = tape.watch(l.bias);
  }
  return live;
}

void write_checkpoint(std::ostream& out, const ModelParams& params) {
  const NetworkSpec& s = params.spec;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "input_dim " << s.input_dim << '\n';
  out << "hidden_dims";
  for (std::size_t h : s.hidden_dims) out << ' ' << h;
  out << '\n';
  out << "feature_dim " << s.feature_dim << '\n';
  out << "num_classes " << s.num_classes << '\n';
  out << "init_seed " << params.init_seed << '\n';
  const auto tensors = parameters(params);
  out << "tensors " << tensors.size() << '\n';
  for (const Tensor& t : tensors) {
    out << "tensor " << t.rows() << ' ' << t.cols() << '\n';
    const auto& data = t.value().data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (i) out << ' ';
      out << text::format_double(data[i]);
    }
    out << '\n';
  }
}

ModelParams read_checkpoint(std::istream& in) {
  {
    const std::string line = next_line(in, "header");
    auto fields = keyed_line(line, kCheckpointMagic);
    if (fields.size() != 1 || text::parse_int(fields[0]) != kCheckpointVersion) {
      throw IoError("unsupported checkpoint version: '" + line + "'");
    }
  }
  ModelParams params;
  NetworkSpec& s = params.spec;
  s.input_dim = keyed_uint(in, "input_dim");
  {
    const std::string line = next_line(in, "hidden_dims");
    for (auto f : keyed_line(line, "hidden_dims")) s.hidden_dims.push_back(text::parse_uint(f));
  }
  s.feature_dim = keyed_uint(in, "feature_dim");
  s.num_classes = keyed_uint(in, "num_classes");
  params.init_seed = keyed_uint(in, "init_seed");
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }

  // Shapes must match the ones the spec implies.
  const ModelParams reference = init_params(s, 0);
  const auto expected = parameters(reference);
  const std::size_t count = keyed_uint(in, "tensors");
  if (count != expected.size()) throw IoError("checkpoint: tensor count does not match spec");

  std::vector<Matrix> values;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string header = next_line(in, "tensor header");
    auto dims = keyed_line(header, "tensor");
    if (dims.size() != 2) throw IoError("checkpoint: malformed tensor header");
    const std::size_t rows = text::parse_uint(dims[0]);
    const std::size_t cols = text::parse_uint(dims[1]);
    if (rows != expected[i].rows() || cols != expected[i].cols()) {
      throw IoError("checkpoint: tensor " + std::to_string(i) + " has wrong shape");
    }
    const std::string body = next_line(in, "tensor values");
    auto fields = text::split_whitespace(body);
    if (fields.size() != rows * cols) throw IoError("checkpoint: wrong value count");
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < fields.size(); ++k) m.data[k] = text::parse_double(fields[k]);
    values.push_back(std::move(m));
  }
  for (std::size_t l = 0; l < reference.layers.size(); ++l) {
    params.layers.push_back(Layer{Tensor::parameter(std::move(values[2 * l])),
                                  Tensor::parameter(std::move(values[2 * l + 1]))});
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  write_checkpoint(out, params);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace fnndg
