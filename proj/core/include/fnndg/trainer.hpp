// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch SGD with momentum for the three training regimes:
//   source_only  cross-entropy over pooled source batches
//   fnn          cross-entropy + feature-norm loss
//   cfnn         two networks, each with fnn's objective plus a KL mimicry
//                term towards its peer's (detached) predictions
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fnndg/datagen.hpp"
#include "fnndg/losses.hpp"
#include "fnndg/network.hpp"

namespace fnndg {

enum class Regime { kSourceOnly, kFnn, kCfnn };

std::string_view to_string(Regime regime);
/// Accepts "source_only", "fnn", "cfnn". Throws ConfigError otherwise.
Regime parse_regime(std::string_view name);

struct TrainConfig {
  Regime regime = Regime::kFnn;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double gamma = 0.05;
  double delta_r = 1.0;
  int epochs = 15;
  std::size_t batch_size = 30;
  std::uint64_t seed = 1;
  /// Initialization seed of the second CFNN network; seed + 1 when unset.
  std::optional<std::uint64_t> peer_seed;
  NetworkSpec network;

  NormLossConfig norm_loss() const { return {gamma, delta_r}; }
  void validate() const;
};

/// Linear feature extractor (no hidden layer) with 32 output features.
NetworkSpec default_network_spec(int input_dim, int num_classes);

struct OptimizerState {
  std::vector<Matrix> velocity;

  static OptimizerState zeros_like(std::span<const Tensor> params);
};

/// v <- momentum * v + g;  theta <- theta - lr * v.
/// Throws ContractError if grads or velocity do not mirror params.
void sgd_momentum_step(std::span<Tensor* const> params, std::span<const Matrix> grads,
                       OptimizerState& state, double learning_rate, double momentum);

struct LossRecord {
  double class_loss = 0.0;
  double domain_loss = 0.0;
  double mimicry_loss = 0.0;
  double total = 0.0;

  bool operator==(const LossRecord&) const = default;
};

struct TrainResult {
  /// One model, or two for cfnn where the first is the reported network.
  std::vector<ModelParams> final_params;
  /// Per optimization step, for the reported network.
  std::vector<LossRecord> loss_history;
  /// cfnn only: the peer network's per-step losses.
  std::vector<LossRecord> peer_loss_history;
  /// Mean feature norm over each batch, measured before the step's update.
  std::vector<double> norm_trace;
  /// Samples consumed during training, keyed by domain index.
  std::map<int, std::size_t> domain_sample_counts;

  const ModelParams& model() const { return final_params.front(); }
  std::size_t steps() const { return loss_history.size(); }
};

TrainResult train_source_only(const Scenario& scenario, const std::vector<int>& sources,
                              const TrainConfig& cfg);
TrainResult train_fnn(const Scenario& scenario, const std::vector<int>& sources,
                      const TrainConfig& cfg);
TrainResult train_cfnn(const Scenario& scenario, const std::vector<int>& sources,
                       const TrainConfig& cfg);
/// Dispatches on cfg.regime.
TrainResult train(const Scenario& scenario, const std::vector<int>& sources,
                  const TrainConfig& cfg);

/// One line per step:
///   step=<i> class_loss=<x> domain_loss=<x> mimicry_loss=<x> total=<x> mean_feature_norm=<x>
void write_training_log(std::ostream& out, const TrainResult& result);

}  // namespace fnndg
