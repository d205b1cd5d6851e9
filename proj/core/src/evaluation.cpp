// SPDX-License-Identifier: Apache-2.0
#include "fnndg/evaluation.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "fnndg/errors.hpp"
#include "fnndg/text_io.hpp"

namespace fnndg {

std::vector<int> predict(const ModelParams& params, const Matrix& inputs) {
  const Tensor logits = forward_logits(params, forward_features(params, Tensor::constant(inputs)));
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.value().row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

double evaluate_accuracy(const ModelParams& params, const Scenario& scenario, int target_domain) {
  if (target_domain < 0 || target_domain >= scenario.num_domains()) {
    throw ContractError("evaluate_accuracy: unknown domain " + std::to_string(target_domain));
  }
  const Matrix inputs = scenario.domain_inputs(target_domain);
  if (inputs.rows == 0) {
    throw ContractError("evaluate_accuracy: domain " + std::to_string(target_domain) +
                        " has no samples");
  }
  const auto labels = scenario.domain_labels(target_domain);
  const auto preds = predict(params, inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<PredictionRecord> prediction_dump(const ModelParams& params, const Scenario& scenario,
                                              int domain) {
  const auto idx = scenario.domain_sample_indices(domain);
  const auto preds = predict(params, scenario.domain_inputs(domain));
  std::vector<PredictionRecord> out;
  out.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.push_back({idx[i], scenario.samples[idx[i]].label, preds[i]});
  }
  return out;
}

void write_embeddings(std::ostream& out, const ModelParams& params, const Scenario& scenario) {
  Matrix inputs(scenario.samples.size(), static_cast<std::size_t>(scenario.input_dim));
  for (std::size_t i = 0; i < scenario.samples.size(); ++i) {
    const auto& f = scenario.samples[i].features;
    std::copy(f.begin(), f.end(), inputs.row(i).begin());
  }
  const Tensor features = forward_features(params, Tensor::constant(std::move(inputs)));
  for (std::size_t i = 0; i < scenario.samples.size(); ++i) {
    const Sample& s = scenario.samples[i];
    out << i << ',' << s.domain << ',' << s.label;
    for (double v : features.value().row(i)) out << ',' << text::format_double(v);
    out << '\n';
  }
}

std::vector<EmbeddingRow> read_embeddings(std::istream& in) {
  std::vector<EmbeddingRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto f = text::split(line, ',');
    if (f.size() < 4) throw IoError("embedding dump: malformed line '" + line + "'");
    EmbeddingRow row;
    row.sample_index = text::parse_uint(f[0]);
    row.domain = static_cast<int>(text::parse_int(f[1]));
    row.label = static_cast<int>(text::parse_int(f[2]));
    for (std::size_t k = 3; k < f.size(); ++k) row.features.push_back(text::parse_double(f[k]));
    rows.push_back(std::move(row));
  }
  return rows;
}

void export_embeddings(const ModelParams& params, const Scenario& scenario,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings to " + path.string());
  write_embeddings(out, params, scenario);
  if (!out) throw IoError("failed writing embeddings to " + path.string());
}

}  // namespace fnndg
