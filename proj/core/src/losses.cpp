// SPDX-License-Identifier: Apache-2.0
#include "fnndg/losses.hpp"

#include <cmath>
#include <string>

#include "fnndg/errors.hpp"
#include "fnndg/ops.hpp"

namespace fnndg {

void NormLossConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ConfigError("gamma must be a finite non-negative number");
  }
  if (!(delta_r >= 0.0) || !std::isfinite(delta_r)) {
    throw ConfigError("delta_r must be a finite non-negative number");
  }
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  if (n == 0) throw ContractError("cross_entropy: empty batch");
  if (labels.size() != n) {
    throw ContractError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(n) + " rows");
  }
  Matrix one_hot(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ContractError("cross_entropy: label " + std::to_string(y) + " at index " +
                          std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
    one_hot(i, static_cast<std::size_t>(y)) = 1.0;
  }
  const Tensor log_p = clamped_log(softmax_rows(logits));
  const Tensor picked = sum(multiply(Tensor::constant(std::move(one_hot)), log_p));
  return scale(picked, -1.0 / static_cast<double>(n));
}

Tensor adaptive_radius(const Tensor& features, double delta_r) {
  return add_scalar(detach(row_l2_norm(features)), delta_r);
}

Tensor feature_norm_loss(const Tensor& features, const NormLossConfig& cfg) {
  if (features.rows() == 0) throw ContractError("feature_norm_loss: empty batch");
  const Tensor norms = row_l2_norm(features);
  const Tensor radius = adaptive_radius(features, cfg.delta_r);
  return scale(mean(square(subtract(norms, radius))), cfg.gamma);
}

Tensor kl_mimicry(const Tensor& p_self, const Tensor& p_peer) {
  if (!p_self.value().same_shape(p_peer.value())) {
    throw ContractError("kl_mimicry: shape mismatch " + p_self.value().shape_string() + " vs " +
                        p_peer.value().shape_string());
  }
  if (p_self.rows() == 0) throw ContractError("kl_mimicry: empty batch");
  const Tensor peer = detach(p_peer);
  const Tensor log_ratio = subtract(clamped_log(peer), clamped_log(p_self));
  return scale(sum(multiply(peer, log_ratio)), 1.0 / static_cast<double>(p_self.rows()));
}

LossTerms fnn_total(const Tensor& logits, std::span<const int> labels, const Tensor& features,
                    const NormLossConfig& cfg) {
  if (features.rows() != logits.rows()) {
    throw ShapeError("fnn_total: features and logits disagree on batch size");
  }
  LossTerms t;
  t.class_loss = cross_entropy(logits, labels);
  t.domain_loss = feature_norm_loss(features, cfg);
  t.mimicry_loss = Tensor::constant(Matrix(1, 1));
  t.total = add(t.class_loss, t.domain_loss);
  return t;
}

LossTerms cfnn_total(const Tensor& logits_self, std::span<const int> labels,
                     const Tensor& features_self, const Tensor& p_peer,
                     const NormLossConfig& cfg) {
  LossTerms t = fnn_total(logits_self, labels, features_self, cfg);
  t.mimicry_loss = kl_mimicry(softmax_rows(logits_self), p_peer);
  t.total = add(t.total, t.mimicry_loss);
  return t;
}

}  // namespace fnndg
