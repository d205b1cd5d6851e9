// SPDX-License-Identifier: Apache-2.0
//
// Fully connected feature extractor F followed by a linear classifier head C.
// F applies relu between its layers but not after the last one, so feature
// norms are unbounded.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "fnndg/tensor.hpp"

namespace fnndg {

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;

  /// Throws ConfigError when any dimension is zero.
  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

struct Layer {
  Tensor weight;  // [fan_in x fan_out]
  Tensor bias;    // [1 x fan_out]
};

struct ModelParams {
  NetworkSpec spec;
  std::uint64_t init_seed = 0;
  /// Feature-extractor layers in order, then the classifier head.
  std::vector<Layer> layers;

  std::span<const Layer> feature_layers() const { return {layers.data(), layers.size() - 1}; }
  const Layer& head() const { return layers.back(); }
};

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed);

/// F(x): [n x input_dim] -> [n x feature_dim].
Tensor forward_features(const ModelParams& params, const Tensor& x);

/// C(features): [n x feature_dim] -> [n x num_classes] logits.
Tensor forward_logits(const ModelParams& params, const Tensor& features);

/// Weight, bias for every layer in order. All entries require grad.
std::vector<Tensor> parameters(const ModelParams& params);
/// Same order as parameters(); used by the optimizer to write updates back.
std::vector<Tensor*> mutable_parameters(ModelParams& params);

/// Copy of `params` whose tensors are watched by `tape`.
ModelParams track(const ModelParams& params, Tape& tape);

/// Text checkpoint: header with spec and seed, then one record per tensor in
/// parameters() order. Reading it back is bitwise exact.
void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace fnndg
