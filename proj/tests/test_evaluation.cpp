// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fnndg/fnndg.hpp"

namespace fnndg {
namespace {

// Noise-free domains: every sample sits exactly on its (transformed) prototype.
Scenario noiseless_scenario(int k, int d) {
  std::vector<DomainSpec> domains(2);
  for (DomainSpec& s : domains) s.noise_sigma = 0.0;
  return generate_scenario(k, d, 10, domains, 77);
}

// Linear F = identity, head rows = prototypes: logit_c = <x, proto_c>. Prototypes
// share one norm, so the largest inner product is the sample's own prototype.
ModelParams prototype_classifier(const Scenario& sc) {
  const auto d = static_cast<std::size_t>(sc.input_dim);
  const auto k = static_cast<std::size_t>(sc.num_classes);
  ModelParams p = init_params(NetworkSpec{d, {}, d, k}, 0);
  p.layers[0].weight = Tensor::parameter(Matrix::identity(d));
  p.layers[0].bias = Tensor::parameter(Matrix(1, d));
  Matrix head(d, k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < d; ++i) head(i, c) = sc.class_prototypes[c][i];
  }
  p.layers[1].weight = Tensor::parameter(head);
  p.layers[1].bias = Tensor::parameter(Matrix(1, k));
  return p;
}

ModelParams zero_model(const NetworkSpec& spec) {
  ModelParams p = init_params(spec, 0);
  for (Tensor* t : mutable_parameters(p)) *t = Tensor::parameter(Matrix(t->rows(), t->cols()));
  return p;
}

TEST(Predict, TiesGoToLowestIndex) {
  const ModelParams p = zero_model(NetworkSpec{2, {}, 2, 4});
  const auto preds = predict(p, Matrix(3, 2, 1.0));
  for (int y : preds) EXPECT_EQ(y, 0);
}

TEST(EvaluateAccuracy, OracleClassifierIsPerfect) {
  const Scenario sc = noiseless_scenario(5, 4);
  EXPECT_EQ(evaluate_accuracy(prototype_classifier(sc), sc, 0), 1.0);
  EXPECT_EQ(evaluate_accuracy(prototype_classifier(sc), sc, 1), 1.0);
}

TEST(EvaluateAccuracy, ConstantPredictorScoresOneOverK) {
  const Scenario sc = noiseless_scenario(4, 3);
  const ModelParams p = zero_model(NetworkSpec{3, {}, 2, 4});
  EXPECT_DOUBLE_EQ(evaluate_accuracy(p, sc, 1), 0.25);
}

TEST(EvaluateAccuracy, MatchesRecountFromDump) {
  const Scenario sc = default_recipe().generate();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ModelParams p = init_params(default_network_spec(4, 5), seed);
    const auto dump = prediction_dump(p, sc, 2);
    ASSERT_EQ(dump.size(), sc.domain_sample_indices(2).size());
    std::size_t correct = 0;
    for (const auto& rec : dump) {
      EXPECT_EQ(rec.label, sc.samples[rec.sample_index].label);
      if (rec.label == rec.prediction) ++correct;
    }
    EXPECT_EQ(evaluate_accuracy(p, sc, 2), static_cast<double>(correct) / static_cast<double>(dump.size()));
  }
}

TEST(EvaluateAccuracy, UnknownOrEmptyDomainIsContractError) {
  Scenario sc = noiseless_scenario(3, 2);
  const ModelParams p = prototype_classifier(sc);
  EXPECT_THROW(evaluate_accuracy(p, sc, 5), ContractError);
  EXPECT_THROW(evaluate_accuracy(p, sc, -1), ContractError);
  std::erase_if(sc.samples, [](const Sample& s) { return s.domain == 1; });
  EXPECT_THROW(evaluate_accuracy(p, sc, 1), ContractError);
}

TEST(Embeddings, OneLinePerSampleAndBitwiseRoundTrip) {
  const Scenario sc = default_recipe().generate();
  const ModelParams p = init_params(default_network_spec(4, 5), 9);
  std::stringstream buf;
  write_embeddings(buf, p, sc);
  const auto rows = read_embeddings(buf);
  ASSERT_EQ(rows.size(), sc.samples.size());
  const Tensor f = forward_features(p, Tensor::constant(sc.domain_inputs(1)));
  const auto idx = sc.domain_sample_indices(1);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const EmbeddingRow& row = rows[idx[i]];
    EXPECT_EQ(row.sample_index, idx[i]);
    EXPECT_EQ(row.domain, 1);
    EXPECT_EQ(row.label, sc.samples[idx[i]].label);
    ASSERT_EQ(row.features.size(), f.cols());
    for (std::size_t k = 0; k < f.cols(); ++k) EXPECT_EQ(row.features[k], f(i, k));
  }
}

TEST(Embeddings, ZeroModelGivesZeroColumns) {
  const Scenario sc = noiseless_scenario(3, 3);
  std::stringstream buf;
  write_embeddings(buf, zero_model(NetworkSpec{3, {4}, 5, 3}), sc);
  for (const EmbeddingRow& row : read_embeddings(buf)) {
    ASSERT_EQ(row.features.size(), 5u);
    for (double v : row.features) EXPECT_EQ(v, 0.0);
  }
}

TEST(Embeddings, ExportWritesFileAndRejectsBadPath) {
  const Scenario sc = noiseless_scenario(3, 3);
  const ModelParams p = prototype_classifier(sc);
  const auto path = std::filesystem::temp_directory_path() / "fnndg_test_embeddings.csv";
  export_embeddings(p, sc, path);
  std::ifstream in(path);
  EXPECT_EQ(read_embeddings(in).size(), sc.samples.size());
  std::filesystem::remove(path);
  EXPECT_THROW(export_embeddings(p, sc, "/nonexistent/dir/emb.csv"), IoError);
}

}  // namespace
}  // namespace fnndg
