// SPDX-License-Identifier: Apache-2.0
#include "fnndg/trainer.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "fnndg/errors.hpp"
#include "fnndg/ops.hpp"
#include "fnndg/rng.hpp"
#include "fnndg/text_io.hpp"

namespace fnndg {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

struct StepOutput {
  LossRecord record;
  double mean_norm = 0.0;
};

LossRecord to_record(const LossTerms& t) {
  return {t.class_loss.item(), t.domain_loss.item(), t.mimicry_loss.item(), t.total.item()};
}

double mean_row_norm(const Tensor& features) {
  const Tensor norms = row_l2_norm(features);
  double s = 0.0;
  for (double v : norms.value().data) s += v;
  return s / static_cast<double>(norms.rows());
}

std::vector<Matrix> gradients_for(const Gradients& grads, const ModelParams& live) {
  std::vector<Matrix> out;
  for (const Tensor& p : parameters(live)) out.push_back(grads.of(p));
  return out;
}

void check_inputs(const Scenario& scenario, const std::vector<int>& sources,
                  const TrainConfig& cfg, Regime expected) {
  if (cfg.regime != expected) {
    throw ConfigError("training routine for " + std::string(to_string(expected)) +
                      " called with regime " + std::string(to_string(cfg.regime)));
  }
  cfg.validate();
  if (sources.empty()) throw ConfigError("no source domains to train on");
  if (cfg.network.input_dim != static_cast<std::size_t>(scenario.input_dim) ||
      cfg.network.num_classes != static_cast<std::size_t>(scenario.num_classes)) {
    throw ConfigError("network spec does not match scenario dimensions");
  }
}

template <typename StepFn>
void run_epochs(const Scenario& scenario, const std::vector<int>& sources, const TrainConfig& cfg,
                TrainResult& result, StepFn&& step) {
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = make_batches(scenario, sources, cfg.batch_size,
                                      mix_seed(cfg.seed ^ kShuffleStream, static_cast<std::uint64_t>(epoch)));
    for (const Batch& batch : batches) {
      for (int d : batch.domain_indices) ++result.domain_sample_counts[d];
      step(batch);
    }
  }
}

TrainResult train_single(const Scenario& scenario, const std::vector<int>& sources,
                         const TrainConfig& cfg, bool with_norm_loss) {
  TrainResult result;
  ModelParams params = init_params(cfg.network, cfg.seed);
  OptimizerState opt = OptimizerState::zeros_like(parameters(params));
  const NormLossConfig norm_cfg = cfg.norm_loss();

  run_epochs(scenario, sources, cfg, result, [&](const Batch& batch) {
    Tape tape;
    const ModelParams live = track(params, tape);
    const Tensor features = forward_features(live, batch.inputs);
    const Tensor logits = forward_logits(live, features);
    LossTerms terms;
    if (with_norm_loss) {
      terms = fnn_total(logits, batch.labels, features, norm_cfg);
    } else {
      terms.class_loss = cross_entropy(logits, batch.labels);
      terms.domain_loss = Tensor::constant(Matrix(1, 1));
      terms.mimicry_loss = Tensor::constant(Matrix(1, 1));
      terms.total = terms.class_loss;
    }
    result.norm_trace.push_back(mean_row_norm(features));
    result.loss_history.push_back(to_record(terms));

    const Gradients grads = tape.backward(terms.total);
    const auto g = gradients_for(grads, live);
    sgd_momentum_step(mutable_parameters(params), g, opt, cfg.learning_rate, cfg.momentum);
  });
  result.final_params.push_back(std::move(params));
  return result;
}

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::kSourceOnly:
      return "source_only";
    case Regime::kFnn:
      return "fnn";
    case Regime::kCfnn:
      return "cfnn";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  if (name == "source_only") return Regime::kSourceOnly;
  if (name == "fnn") return Regime::kFnn;
  if (name == "cfnn") return Regime::kCfnn;
  throw ConfigError("unknown regime '" + std::string(name) + "' (expected source_only, fnn or cfnn)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  norm_loss().validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  network.validate();
}

NetworkSpec default_network_spec(int input_dim, int num_classes) {
  return NetworkSpec{static_cast<std::size_t>(input_dim), {}, 32,
                     static_cast<std::size_t>(num_classes)};
}

OptimizerState OptimizerState::zeros_like(std::span<const Tensor> params) {
  OptimizerState s;
  for (const Tensor& p : params) s.velocity.emplace_back(p.rows(), p.cols());
  return s;
}

void sgd_momentum_step(std::span<Tensor* const> params, std::span<const Matrix> grads,
                       OptimizerState& state, double learning_rate, double momentum) {
  if (grads.size() != params.size() || state.velocity.size() != params.size()) {
    throw ContractError("sgd_momentum_step: " + std::to_string(params.size()) + " params, " +
                        std::to_string(grads.size()) + " grads, " +
                        std::to_string(state.velocity.size()) + " velocity buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& theta = params[i]->value();
    Matrix& v = state.velocity[i];
    if (!grads[i].same_shape(theta) || !v.same_shape(theta)) {
      throw ContractError("sgd_momentum_step: shape mismatch for parameter " + std::to_string(i) +
                          ": " + theta.shape_string() + " vs grad " + grads[i].shape_string());
    }
    Matrix updated = theta;
    for (std::size_t k = 0; k < updated.size(); ++k) {
      v.data[k] = momentum * v.data[k] + grads[i].data[k];
      updated.data[k] -= learning_rate * v.data[k];
    }
    *params[i] = Tensor::parameter(std::move(updated));
  }
}

TrainResult train_source_only(const Scenario& scenario, const std::vector<int>& sources,
                              const TrainConfig& cfg) {
  check_inputs(scenario, sources, cfg, Regime::kSourceOnly);
  return train_single(scenario, sources, cfg, false);
}

TrainResult train_fnn(const Scenario& scenario, const std::vector<int>& sources,
                      const TrainConfig& cfg) {
  check_inputs(scenario, sources, cfg, Regime::kFnn);
  return train_single(scenario, sources, cfg, true);
}

TrainResult train_cfnn(const Scenario& scenario, const std::vector<int>& sources,
                       const TrainConfig& cfg) {
  check_inputs(scenario, sources, cfg, Regime::kCfnn);
  TrainResult result;
  ModelParams net1 = init_params(cfg.network, cfg.seed);
  ModelParams net2 = init_params(cfg.network, cfg.peer_seed.value_or(cfg.seed + 1));
  OptimizerState opt1 = OptimizerState::zeros_like(parameters(net1));
  OptimizerState opt2 = OptimizerState::zeros_like(parameters(net2));
  const NormLossConfig norm_cfg = cfg.norm_loss();

  run_epochs(scenario, sources, cfg, result, [&](const Batch& batch) {
    Tape tape;
    const ModelParams live1 = track(net1, tape);
    const ModelParams live2 = track(net2, tape);
    const Tensor f1 = forward_features(live1, batch.inputs);
    const Tensor f2 = forward_features(live2, batch.inputs);
    const Tensor z1 = forward_logits(live1, f1);
    const Tensor z2 = forward_logits(live2, f2);
    // Each network mimics the other's current predictions; kl_mimicry
    // detaches the peer so the two objectives do not share gradients.
    const LossTerms t1 = cfnn_total(z1, batch.labels, f1, softmax_rows(z2), norm_cfg);
    const LossTerms t2 = cfnn_total(z2, batch.labels, f2, softmax_rows(z1), norm_cfg);
    result.norm_trace.push_back(mean_row_norm(f1));
    result.loss_history.push_back(to_record(t1));
    result.peer_loss_history.push_back(to_record(t2));

    const Gradients grads = tape.backward(add(t1.total, t2.total));
    const auto g1 = gradients_for(grads, live1);
    const auto g2 = gradients_for(grads, live2);
    sgd_momentum_step(mutable_parameters(net1), g1, opt1, cfg.learning_rate, cfg.momentum);
    sgd_momentum_step(mutable_parameters(net2), g2, opt2, cfg.learning_rate, cfg.momentum);
  });
  result.final_params.push_back(std::move(net1));
  result.final_params.push_back(std::move(net2));
  return result;
}

TrainResult train(const Scenario& scenario, const std::vector<int>& sources,
                  const TrainConfig& cfg) {
  switch (cfg.regime) {
    case Regime::kSourceOnly:
      return train_source_only(scenario, sources, cfg);
    case Regime::kFnn:
      return train_fnn(scenario, sources, cfg);
    case Regime::kCfnn:
      return train_cfnn(scenario, sources, cfg);
  }
  throw ConfigError("unknown regime");
}

void write_training_log(std::ostream& out, const TrainResult& result) {
  using text::format_double;
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
    const LossRecord& r = result.loss_history[i];
    out << "step=" << i << " class_loss=" << format_double(r.class_loss)
        << " domain_loss=" << format_double(r.domain_loss)
        << " mimicry_loss=" << format_double(r.mimicry_loss)
        << " total=" << format_double(r.total)
        << " mean_feature_norm=" << format_double(result.norm_trace[i]) << '\n';
  }
}

}  // namespace fnndg
