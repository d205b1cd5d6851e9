// SPDX-License-Identifier: Apache-2.0
//
// Training objectives for the source-only, FNN and CFNN regimes.
//
// The feature-norm term pulls every sample's feature norm towards a radius one
// step Delta_r beyond its current norm. The radius is computed from the same
// forward pass but detached, so the forward value is the constant
// gamma * Delta_r^2 while the gradient pushes each norm outward:
//
//   d L_domain / d f_i = -(2 gamma Delta_r / n) * f_i / |f_i|
#pragma once

#include <cstddef>
#include <span>

#include "fnndg/tensor.hpp"

namespace fnndg {

struct NormLossConfig {
  double gamma = 0.05;
  double delta_r = 1.0;

  /// Throws ConfigError when either value is negative or not finite.
  void validate() const;
};

struct LossTerms {
  Tensor class_loss;
  Tensor domain_loss;
  Tensor mimicry_loss;
  Tensor total;
};

/// Mean over the batch of -log softmax(logits)[i, labels[i]].
/// Throws ContractError naming the offending index for a label outside [0, K).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// detach(|f_i|) + delta_r for every row, [n x m] -> [n x 1].
Tensor adaptive_radius(const Tensor& features, double delta_r);

/// gamma * mean_i (|f_i| - R_i)^2 with R from adaptive_radius.
Tensor feature_norm_loss(const Tensor& features, const NormLossConfig& cfg);

/// Mean over the batch of KL(p_peer || p_self). `p_peer` is detached, so the
/// gradient reaches only `p_self`. Probabilities are floored at kLogClamp.
Tensor kl_mimicry(const Tensor& p_self, const Tensor& p_peer);

/// cross_entropy + feature_norm_loss; the mimicry term is a zero constant.
LossTerms fnn_total(const Tensor& logits, std::span<const int> labels, const Tensor& features,
                    const NormLossConfig& cfg);

/// fnn_total plus kl_mimicry(softmax(logits_self), p_peer).
LossTerms cfnn_total(const Tensor& logits_self, std::span<const int> labels,
                     const Tensor& features_self, const Tensor& p_peer,
                     const NormLossConfig& cfg);

}  // namespace fnndg
