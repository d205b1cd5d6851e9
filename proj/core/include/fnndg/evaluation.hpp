// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "fnndg/datagen.hpp"
#include "fnndg/network.hpp"

namespace fnndg {

/// Argmax of the logits per row; ties go to the lowest class index.
std::vector<int> predict(const ModelParams& params, const Matrix& inputs);

/// Fraction of target-domain samples classified correctly.
/// Throws ContractError when the domain is unknown or has no samples.
double evaluate_accuracy(const ModelParams& params, const Scenario& scenario, int target_domain);

struct PredictionRecord {
  std::size_t sample_index = 0;
  int label = 0;
  int prediction = 0;
};

/// Raw per-sample predictions for one domain, in storage order.
std::vector<PredictionRecord> prediction_dump(const ModelParams& params, const Scenario& scenario,
                                              int domain);

struct EmbeddingRow {
  std::size_t sample_index = 0;
  int domain = 0;
  int label = 0;
  std::vector<double> features;
};

/// One comma-separated line per sample, in storage order:
///   sample_index,domain,label,f_1,...,f_m
void write_embeddings(std::ostream& out, const ModelParams& params, const Scenario& scenario);
std::vector<EmbeddingRow> read_embeddings(std::istream& in);
/// Throws IoError when `path` cannot be written.
void export_embeddings(const ModelParams& params, const Scenario& scenario,
                       const std::filesystem::path& path);

}  // namespace fnndg
