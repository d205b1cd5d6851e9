// SPDX-License-Identifier: Apache-2.0
//
// Leave-one-domain-out evaluation protocols.
//
// Every experiment is a grid of independent cells (regime x seed x setting x
// delta_r). A cell trains on every domain except the target and evaluates on
// the target. Cells may run on worker threads; results are assembled in cell
// order, so reports do not depend on scheduling.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fnndg/datagen.hpp"
#include "fnndg/trainer.hpp"

namespace fnndg {

inline constexpr std::uint64_t kDefaultScenarioSeed = 2020;
inline constexpr int kDefaultTargetDomain = 3;

/// Parameters from which a scenario is generated.
struct ScenarioRecipe {
  int num_classes = 5;
  int input_dim = 4;
  int samples_per_class = 200;
  std::vector<DomainSpec> domains;
  std::uint64_t seed = kDefaultScenarioSeed;

  Scenario generate() const { return generate_scenario(num_classes, input_dim, samples_per_class, domains, seed); }
};

/// Three shifted source domains and one target (index 3), each a different
/// rotation/scale/translation of the shared class prototypes.
std::vector<DomainSpec> default_domain_specs(int input_dim, double noise_sigma = 0.3);
/// K=5, d=4, 200 samples per class and domain, noise 0.3.
ScenarioRecipe default_recipe();

/// Removes two distinct classes from each of the three default source domains.
std::map<int, std::set<int>> default_category_shift();

struct ExperimentConfig {
  std::string experiment_id = "dg";
  Scenario scenario;
  int target_domain = kDefaultTargetDomain;
  std::vector<Regime> regimes{Regime::kSourceOnly, Regime::kFnn, Regime::kCfnn};
  std::map<int, std::set<int>> category_shift;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<double> delta_r_values;
  /// Hyperparameter template; regime, seed and (for sweeps) delta_r are set per cell.
  TrainConfig train;
  unsigned jobs = 1;

  /// Every domain but the target, ascending.
  std::vector<int> source_domains() const;
  /// Throws ConfigError on an unusable configuration. Called before any training.
  void validate() const;
};

/// A config over `scenario` with the default network for its dimensions.
ExperimentConfig make_experiment(Scenario scenario, int target_domain);

struct RunRecord {
  std::string experiment_id;
  Regime regime = Regime::kSourceOnly;
  std::uint64_t seed = 0;
  int target_domain = 0;
  bool category_shift = false;
  double delta_r = 0.0;
  double accuracy = 0.0;
  /// accuracy(shift) - accuracy(full) for the same regime and seed; NaN on full-label rows.
  double degraded_accuracy = 0.0;
  /// accuracy - source_only accuracy in the same setting and seed; NaN without a source_only run.
  double transfer_gain = 0.0;
  /// Audit counter: target-domain samples that reached a training batch.
  std::size_t target_samples_touched = 0;
  std::size_t target_sample_count = 0;
  std::size_t target_correct = 0;
};

struct RegimeSummary {
  Regime regime = Regime::kSourceOnly;
  bool category_shift = false;
  double delta_r = 0.0;
  std::size_t runs = 0;
  double mean_accuracy = 0.0;
  /// Sample standard deviation (n - 1); zero for a single run.
  double std_accuracy = 0.0;
  double mean_degraded_accuracy = 0.0;
  double mean_transfer_gain = 0.0;
};

struct MetricsReport {
  std::string experiment_id;
  int target_domain = 0;
  std::vector<RunRecord> runs;
  std::vector<RegimeSummary> summaries;

  /// Throws ContractError if no such summary exists. With no delta_r the
  /// first summary matching regime and setting is returned.
  const RegimeSummary& summary(Regime regime, bool category_shift = false,
                               std::optional<double> delta_r = std::nullopt) const;
  std::size_t total_target_samples_touched() const;
};

/// Traditional setting: every source keeps its full label set.
MetricsReport run_dg_experiment(const ExperimentConfig& cfg);

/// Runs every regime with full-label and category-shifted sources, filling
/// degraded_accuracy and transfer_gain. Requires a non-empty category_shift.
MetricsReport run_category_shift_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double delta_r = 0.0;
  Regime regime = Regime::kFnn;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

struct SweepResult {
  MetricsReport report;
  std::vector<SweepRow> rows;
};

/// One traditional-setting experiment per delta_r value (>= 2 values), shared seeds.
SweepResult run_sensitivity_sweep(const ExperimentConfig& cfg);

/// Columns: experiment_id,regime,seed,target_domain,category_shift_flag,
///          delta_r,accuracy,degraded_accuracy,transfer_gain
void write_metrics_csv(std::ostream& out, const MetricsReport& report);
std::vector<RunRecord> read_metrics_csv(std::istream& in);
/// Nested document: summaries plus the per-run records they derive from.
void write_metrics_json(std::ostream& out, const MetricsReport& report);
/// Columns: delta_r,regime,mean_accuracy,std_accuracy
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Sample mean and standard deviation; used for every report aggregate.
double mean_of(const std::vector<double>& xs);
double sample_std_of(const std::vector<double>& xs);

}  // namespace fnndg
