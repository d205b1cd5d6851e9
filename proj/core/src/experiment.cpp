// SPDX-License-Identifier: Apache-2.0
#include "fnndg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "fnndg/errors.hpp"
#include "fnndg/evaluation.hpp"
#include "fnndg/text_io.hpp"

namespace fnndg {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kCsvHeader =
    "experiment_id,regime,seed,target_domain,category_shift_flag,delta_r,accuracy,"
    "degraded_accuracy,transfer_gain";

struct Cell {
  Regime regime;
  std::uint64_t seed;
  bool category_shift;
  double delta_r;
};

struct CellResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t target_touched = 0;
};

CellResult run_cell(const ExperimentConfig& cfg, const Scenario& scenario, const Cell& cell) {
  TrainConfig tc = cfg.train;
  tc.regime = cell.regime;
  tc.seed = cell.seed;
  tc.delta_r = cell.delta_r;
  const TrainResult trained = train(scenario, cfg.source_domains(), tc);

  CellResult out;
  if (auto it = trained.domain_sample_counts.find(cfg.target_domain);
      it != trained.domain_sample_counts.end()) {
    out.target_touched = it->second;
  }
  const auto dump = prediction_dump(trained.model(), scenario, cfg.target_domain);
  out.total = dump.size();
  for (const auto& p : dump) out.correct += p.label == p.prediction ? 1 : 0;
  out.accuracy = evaluate_accuracy(trained.model(), scenario, cfg.target_domain);
  return out;
}

std::vector<CellResult> run_cells(const ExperimentConfig& cfg, const Scenario& full,
                                  const Scenario* shifted, const std::vector<Cell>& cells) {
  std::vector<CellResult> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        const Scenario& sc = cells[i].category_shift ? *shifted : full;
        results[i] = run_cell(cfg, sc, cells[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<RunRecord> to_records(const ExperimentConfig& cfg, const std::vector<Cell>& cells,
                                  const std::vector<CellResult>& results) {
  std::vector<RunRecord> runs;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    RunRecord r;
    r.experiment_id = cfg.experiment_id;
    r.regime = cells[i].regime;
    r.seed = cells[i].seed;
    r.target_domain = cfg.target_domain;
    r.category_shift = cells[i].category_shift;
    r.delta_r = cells[i].delta_r;
    r.accuracy = results[i].accuracy;
    r.degraded_accuracy = kNaN;
    r.transfer_gain = kNaN;
    r.target_samples_touched = results[i].target_touched;
    r.target_sample_count = results[i].total;
    r.target_correct = results[i].correct;
    runs.push_back(r);
  }
  return runs;
}

const RunRecord* find_run(const std::vector<RunRecord>& runs, Regime regime, std::uint64_t seed,
                          bool shift, double delta_r) {
  for (const RunRecord& r : runs) {
    if (r.regime == regime && r.seed == seed && r.category_shift == shift && r.delta_r == delta_r) {
      return &r;
    }
  }
  return nullptr;
}

void fill_transfer_gain(std::vector<RunRecord>& runs) {
  for (RunRecord& r : runs) {
    const RunRecord* base = find_run(runs, Regime::kSourceOnly, r.seed, r.category_shift, r.delta_r);
    if (base == nullptr) {
      // Source-only does not depend on delta_r; accept a baseline at any value.
      for (const RunRecord& other : runs) {
        if (other.regime == Regime::kSourceOnly && other.seed == r.seed &&
            other.category_shift == r.category_shift) {
          base = &other;
          break;
        }
      }
    }
    r.transfer_gain = base ? r.accuracy - base->accuracy : kNaN;
  }
}

std::vector<RegimeSummary> summarize(const std::vector<RunRecord>& runs) {
  std::vector<RegimeSummary> out;
  std::vector<std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : runs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const RegimeSummary& s) {
      return s.regime == r.regime && s.category_shift == r.category_shift && s.delta_r == r.delta_r;
    });
    if (it == out.end()) {
      RegimeSummary s;
      s.regime = r.regime;
      s.category_shift = r.category_shift;
      s.delta_r = r.delta_r;
      out.push_back(s);
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[static_cast<std::size_t>(it - out.begin())].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    std::vector<double> acc, degraded, gain;
    for (const RunRecord* r : groups[g]) {
      acc.push_back(r->accuracy);
      degraded.push_back(r->degraded_accuracy);
      gain.push_back(r->transfer_gain);
    }
    out[g].runs = acc.size();
    out[g].mean_accuracy = mean_of(acc);
    out[g].std_accuracy = sample_std_of(acc);
    out[g].mean_degraded_accuracy = mean_of(degraded);
    out[g].mean_transfer_gain = mean_of(gain);
  }
  return out;
}

std::vector<Cell> traditional_cells(const ExperimentConfig& cfg, double delta_r, bool shift) {
  std::vector<Cell> cells;
  for (Regime regime : cfg.regimes) {
    for (std::uint64_t seed : cfg.seeds) cells.push_back({regime, seed, shift, delta_r});
  }
  return cells;
}

std::string csv_double(double v) { return std::isnan(v) ? "nan" : text::format_double(v); }

nlohmann::json json_double(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::vector<DomainSpec> default_domain_specs(int input_dim, double noise_sigma) {
  auto translation = [input_dim](double a, double b) {
    std::vector<double> t(static_cast<std::size_t>(input_dim), 0.0);
    t[0] = a;
    t[1] = b;
    return t;
  };
  return {
      DomainSpec{0.0, 1.0, translation(0.0, 0.0), noise_sigma, {}},
      DomainSpec{0.5, 1.4, translation(1.0, 0.0), noise_sigma, {}},
      DomainSpec{-0.5, 0.7, translation(0.0, 1.0), noise_sigma, {}},
      DomainSpec{1.0, 0.5, translation(-1.0, -1.0), noise_sigma, {}},
  };
}

ScenarioRecipe default_recipe() {
  ScenarioRecipe r;
  r.domains = default_domain_specs(r.input_dim);
  return r;
}

std::map<int, std::set<int>> default_category_shift() {
  return {{0, {0, 1}}, {1, {2, 3}}, {2, {4, 0}}};
}

std::vector<int> ExperimentConfig::source_domains() const {
  std::vector<int> out;
  for (int d = 0; d < scenario.num_domains(); ++d) {
    if (d != target_domain) out.push_back(d);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (scenario.samples.empty()) throw ConfigError("experiment has an empty scenario");
  if (target_domain < 0 || target_domain >= scenario.num_domains()) {
    throw ConfigError("target domain " + std::to_string(target_domain) + " does not exist");
  }
  if (scenario.num_domains() < 2) throw ConfigError("need at least one source domain besides the target");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (regimes.empty()) throw ConfigError("at least one regime is required");
  const auto labels = scenario.label_histogram(target_domain);
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (labels[c] == 0) {
      throw ConfigError("target domain lacks class " + std::to_string(c));
    }
  }
  const auto sources = source_domains();
  if (train.batch_size % sources.size() != 0) {
    throw ConfigError("batch size " + std::to_string(train.batch_size) +
                      " is not divisible by the number of source domains (" +
                      std::to_string(sources.size()) + ")");
  }
  train.validate();
  if (train.network.input_dim != static_cast<std::size_t>(scenario.input_dim) ||
      train.network.num_classes != static_cast<std::size_t>(scenario.num_classes)) {
    throw ConfigError("network spec does not match scenario dimensions");
  }
  for (double dr : delta_r_values) NormLossConfig{train.gamma, dr}.validate();
}

ExperimentConfig make_experiment(Scenario scenario, int target_domain) {
  ExperimentConfig cfg;
  cfg.train.network = default_network_spec(scenario.input_dim, scenario.num_classes);
  cfg.scenario = std::move(scenario);
  cfg.target_domain = target_domain;
  return cfg;
}

const RegimeSummary& MetricsReport::summary(Regime regime, bool category_shift,
                                            std::optional<double> delta_r) const {
  for (const RegimeSummary& s : summaries) {
    if (s.regime == regime && s.category_shift == category_shift &&
        (!delta_r || s.delta_r == *delta_r)) {
      return s;
    }
  }
  throw ContractError("no summary for regime " + std::string(to_string(regime)));
}

std::size_t MetricsReport::total_target_samples_touched() const {
  std::size_t n = 0;
  for (const RunRecord& r : runs) n += r.target_samples_touched;
  return n;
}

MetricsReport run_dg_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto cells = traditional_cells(cfg, cfg.train.delta_r, false);
  const auto results = run_cells(cfg, cfg.scenario, nullptr, cells);
  MetricsReport report;
  report.experiment_id = cfg.experiment_id;
  report.target_domain = cfg.target_domain;
  report.runs = to_records(cfg, cells, results);
  fill_transfer_gain(report.runs);
  report.summaries = summarize(report.runs);
  return report;
}

MetricsReport run_category_shift_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.category_shift.empty()) throw ConfigError("category-shift experiment needs a removal map");
  const Scenario shifted = apply_category_shift(cfg.scenario, cfg.category_shift, cfg.target_domain);

  auto cells = traditional_cells(cfg, cfg.train.delta_r, false);
  const auto shift_cells = traditional_cells(cfg, cfg.train.delta_r, true);
  cells.insert(cells.end(), shift_cells.begin(), shift_cells.end());
  const auto results = run_cells(cfg, cfg.scenario, &shifted, cells);

  MetricsReport report;
  report.experiment_id = cfg.experiment_id;
  report.target_domain = cfg.target_domain;
  report.runs = to_records(cfg, cells, results);
  fill_transfer_gain(report.runs);
  for (RunRecord& r : report.runs) {
    if (!r.category_shift) continue;
    const RunRecord* full = find_run(report.runs, r.regime, r.seed, false, r.delta_r);
    r.degraded_accuracy = r.accuracy - full->accuracy;
  }
  report.summaries = summarize(report.runs);
  return report;
}

SweepResult run_sensitivity_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.delta_r_values.size() < 2) throw ConfigError("a sweep needs at least two delta_r values");
  std::vector<Cell> cells;
  for (double dr : cfg.delta_r_values) {
    const auto part = traditional_cells(cfg, dr, false);
    cells.insert(cells.end(), part.begin(), part.end());
  }
  const auto results = run_cells(cfg, cfg.scenario, nullptr, cells);

  SweepResult out;
  out.report.experiment_id = cfg.experiment_id;
  out.report.target_domain = cfg.target_domain;
  out.report.runs = to_records(cfg, cells, results);
  fill_transfer_gain(out.report.runs);
  out.report.summaries = summarize(out.report.runs);
  // Repeated delta_r values collapse into one summary; emit one row per requested value.
  for (double dr : cfg.delta_r_values) {
    for (Regime regime : cfg.regimes) {
      const RegimeSummary& s = out.report.summary(regime, false, dr);
      out.rows.push_back({dr, regime, s.mean_accuracy, s.std_accuracy});
    }
  }
  return out;
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
  out << kCsvHeader << '\n';
  for (const RunRecord& r : report.runs) {
    out << r.experiment_id << ',' << to_string(r.regime) << ',' << r.seed << ',' << r.target_domain
        << ',' << (r.category_shift ? 1 : 0) << ',' << csv_double(r.delta_r) << ','
        << csv_double(r.accuracy) << ',' << csv_double(r.degraded_accuracy) << ','
        << csv_double(r.transfer_gain) << '\n';
  }
}

std::vector<RunRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kCsvHeader) {
    throw IoError("metrics CSV: missing or unexpected header");
  }
  std::vector<RunRecord> runs;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto f = text::split(line, ',');
    if (f.size() != 9) throw IoError("metrics CSV: expected 9 columns in '" + line + "'");
    RunRecord r;
    r.experiment_id = std::string(f[0]);
    r.regime = parse_regime(f[1]);
    r.seed = text::parse_uint(f[2]);
    r.target_domain = static_cast<int>(text::parse_int(f[3]));
    r.category_shift = text::parse_int(f[4]) != 0;
    r.delta_r = text::parse_double(f[5]);
    r.accuracy = text::parse_double(f[6]);
    r.degraded_accuracy = text::parse_double(f[7]);
    r.transfer_gain = text::parse_double(f[8]);
    runs.push_back(std::move(r));
  }
  return runs;
}

void write_metrics_json(std::ostream& out, const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["experiment_id"] = report.experiment_id;
  doc["target_domain"] = report.target_domain;
  doc["target_samples_touched"] = report.total_target_samples_touched();
  auto& summaries = doc["summaries"] = nlohmann::ordered_json::array();
  for (const RegimeSummary& s : report.summaries) {
    nlohmann::ordered_json j;
    j["regime"] = std::string(to_string(s.regime));
    j["category_shift"] = s.category_shift;
    j["delta_r"] = json_double(s.delta_r);
    j["runs"] = s.runs;
    j["mean_accuracy"] = json_double(s.mean_accuracy);
    j["std_accuracy"] = json_double(s.std_accuracy);
    j["mean_degraded_accuracy"] = json_double(s.mean_degraded_accuracy);
    j["mean_transfer_gain"] = json_double(s.mean_transfer_gain);
    auto& per_seed = j["per_seed"] = nlohmann::ordered_json::array();
    for (const RunRecord& r : report.runs) {
      if (r.regime != s.regime || r.category_shift != s.category_shift || r.delta_r != s.delta_r) continue;
      nlohmann::ordered_json rj;
      rj["seed"] = r.seed;
      rj["accuracy"] = json_double(r.accuracy);
      rj["correct"] = r.target_correct;
      rj["total"] = r.target_sample_count;
      rj["degraded_accuracy"] = json_double(r.degraded_accuracy);
      rj["transfer_gain"] = json_double(r.transfer_gain);
      rj["target_samples_touched"] = r.target_samples_touched;
      per_seed.push_back(std::move(rj));
    }
    summaries.push_back(std::move(j));
  }
  out << doc.dump(2) << '\n';
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "delta_r,regime,mean_accuracy,std_accuracy\n";
  for (const SweepRow& r : rows) {
    out << csv_double(r.delta_r) << ',' << to_string(r.regime) << ',' << csv_double(r.mean_accuracy)
        << ',' << csv_double(r.std_accuracy) << '\n';
  }
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return kNaN;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace fnndg
