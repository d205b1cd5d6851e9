// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "fnndg/fnndg.hpp"
#include "fnndg/text_io.hpp"

namespace fnndg::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  std::string scenario_path;
  std::uint64_t scenario_seed = kDefaultScenarioSeed;
  int classes = 5;
  int dim = 4;
  int per_class = 200;
  double noise = 0.3;
  int target = kDefaultTargetDomain;

  TrainConfig train;
  std::string hidden;
  std::size_t feature_dim = default_network_spec(2, 2).feature_dim;

  std::string out_dir;
  std::string experiment_id;
  unsigned jobs = 1;

  // generate / embed
  std::string out_path;
  // train / embed
  std::string regime = "fnn";
  std::uint64_t seed = 1;
  std::string log_path;
  std::string checkpoint_path;
  // dg / catshift / sweep
  std::string regimes;
  std::string seeds = "1,2,3,4,5";
  std::string remove;
  std::string delta_r_values = "0.5,1.0,1.5";
};

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& s, Parse parse, const char* what) {
  std::vector<T> out;
  if (text::trim(s).empty()) return out;
  for (auto item : text::split(s, ',')) {
    try {
      out.push_back(static_cast<T>(parse(text::trim(item))));
    } catch (const IoError&) {
      throw ConfigError(std::string("invalid ") + what + " list '" + s + "'");
    }
  }
  return out;
}

std::vector<Regime> parse_regimes(const std::string& s) {
  std::vector<Regime> out;
  for (auto item : text::split(s, ',')) out.push_back(parse_regime(text::trim(item)));
  return out;
}

/// "0:0,1;1:2,3" -> {0: {0, 1}, 1: {2, 3}}
std::map<int, std::set<int>> parse_removal(const std::string& s) {
  std::map<int, std::set<int>> out;
  try {
    for (auto group : text::split(s, ';')) {
      if (text::trim(group).empty()) continue;
      auto kv = text::split(group, ':');
      if (kv.size() != 2) throw ConfigError("malformed --remove group '" + std::string(group) + "'");
      auto& classes = out[static_cast<int>(text::parse_int(kv[0]))];
      for (auto c : text::split(kv[1], ',')) {
        if (!text::trim(c).empty()) classes.insert(static_cast<int>(text::parse_int(c)));
      }
    }
  } catch (const IoError& e) {
    throw ConfigError(std::string("malformed --remove value: ") + e.what());
  }
  return out;
}

std::string default_out_dir() {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return "fnndg-out";
}

/// Reads `key = value` lines; '#' starts a comment.
std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view content = line;
    if (auto hash = content.find('#'); hash != std::string_view::npos) content = content.substr(0, hash);
    content = text::trim(content);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = text::trim(content.substr(0, eq));
    const auto value = text::trim(content.substr(eq + 1));
    if (key == "config") throw ConfigError("config files cannot include other config files");
    args.push_back("--" + std::string(key) + "=" + std::string(value));
  }
  return args;
}

/// Config-file entries are inserted right after the subcommand so that flags
/// given on the command line come later and win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.empty()) return args;
  std::vector<std::string> out{args.front()};
  const auto extra = config_file_args(*path);
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

void add_common(CLI::App& cmd, Options& o) {
  cmd.add_option("--config", o.config_path, "key = value file; command-line flags override it");
  cmd.add_option("--scenario", o.scenario_path, "Load this scenario file instead of generating one");
  cmd.add_option("--scenario-seed", o.scenario_seed, "Scenario generation seed");
  cmd.add_option("--classes", o.classes, "Number of classes K")->check(CLI::Range(2, 1000));
  cmd.add_option("--dim", o.dim, "Input dimension d")->check(CLI::Range(2, 1000));
  cmd.add_option("--per-class", o.per_class, "Samples per class per domain")->check(CLI::PositiveNumber);
  cmd.add_option("--noise", o.noise, "Within-class noise sigma")->check(CLI::NonNegativeNumber);
  cmd.add_option("--target", o.target, "Held-out target domain index");
  cmd.add_option("--lr", o.train.learning_rate, "SGD learning rate");
  cmd.add_option("--momentum", o.train.momentum, "SGD momentum");
  cmd.add_option("--gamma", o.train.gamma, "Feature-norm loss weight");
  cmd.add_option("--delta-r", o.train.delta_r, "Residual feature-norm step");
  cmd.add_option("--epochs", o.train.epochs, "Training epochs");
  cmd.add_option("--batch-size", o.train.batch_size, "Batch size (divisible by #sources)");
  cmd.add_option("--hidden", o.hidden, "Comma-separated hidden widths of the feature extractor");
  cmd.add_option("--feature-dim", o.feature_dim, "Feature extractor output width");
  cmd.add_option("--out-dir", o.out_dir, std::string("Output directory (default $") + kOutputDirEnv + " or fnndg-out)");
  cmd.add_option("--experiment-id", o.experiment_id, "Identifier written into metrics files");
  cmd.add_option("--jobs", o.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
}

Scenario build_scenario(const Options& o) {
  if (!o.scenario_path.empty()) {
    try {
      return load_scenario(o.scenario_path);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  return generate_scenario(o.classes, o.dim, o.per_class, default_domain_specs(o.dim, o.noise),
                           o.scenario_seed);
}

TrainConfig build_train_config(const Options& o, const Scenario& sc) {
  TrainConfig tc = o.train;
  tc.network.input_dim = static_cast<std::size_t>(sc.input_dim);
  tc.network.num_classes = static_cast<std::size_t>(sc.num_classes);
  tc.network.feature_dim = o.feature_dim;
  tc.network.hidden_dims = parse_list<std::size_t>(
      o.hidden, [](std::string_view v) { return text::parse_uint(v); }, "hidden width");
  tc.validate();
  return tc;
}

ExperimentConfig build_experiment(const Options& o, const std::string& command,
                                  const std::string& default_regimes) {
  ExperimentConfig cfg;
  cfg.scenario = build_scenario(o);
  cfg.target_domain = o.target;
  cfg.train = build_train_config(o, cfg.scenario);
  cfg.experiment_id = o.experiment_id.empty() ? command : o.experiment_id;
  cfg.regimes = parse_regimes(o.regimes.empty() ? default_regimes : o.regimes);
  cfg.seeds = parse_list<std::uint64_t>(
      o.seeds, [](std::string_view v) { return text::parse_uint(v); }, "seed");
  cfg.jobs = o.jobs;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Options& o) {
  fs::path dir = o.out_dir.empty() ? fs::path(default_out_dir()) : fs::path(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  writer(f);
  if (!f) throw IoError("failed writing " + path.string());
}

void print_summaries(std::ostream& out, const MetricsReport& report) {
  for (const RegimeSummary& s : report.summaries) {
    out << to_string(s.regime) << (s.category_shift ? " [category shift]" : "")
        << " delta_r=" << text::format_double(s.delta_r) << " runs=" << s.runs
        << " mean_accuracy=" << text::format_double(s.mean_accuracy)
        << " std=" << text::format_double(s.std_accuracy);
    if (s.category_shift) {
      out << " degraded=" << text::format_double(s.mean_degraded_accuracy)
          << " transfer_gain=" << text::format_double(s.mean_transfer_gain);
    }
    out << '\n';
  }
}

void write_report(const Options& o, const MetricsReport& report, std::ostream& out) {
  const fs::path dir = output_dir(o);
  write_file(dir / "metrics.csv", [&](std::ostream& f) { write_metrics_csv(f, report); });
  write_file(dir / "metrics.json", [&](std::ostream& f) { write_metrics_json(f, report); });
  print_summaries(out, report);
  out << "target samples touched during training: " << report.total_target_samples_touched() << '\n';
  out << "wrote " << (dir / "metrics.csv").string() << " and metrics.json\n";
}

void cmd_generate(const Options& o, std::ostream& out) {
  const Scenario sc = build_scenario(o);
  const fs::path path = o.out_path.empty() ? output_dir(o) / "scenario.csv" : fs::path(o.out_path);
  save_scenario(path, sc);
  out << "wrote scenario with " << sc.samples.size() << " samples to " << path.string() << '\n';
}

TrainResult train_single_run(const Options& o, const Scenario& sc) {
  if (o.target < 0 || o.target >= sc.num_domains()) {
    throw ConfigError("target domain " + std::to_string(o.target) + " does not exist");
  }
  TrainConfig tc = build_train_config(o, sc);
  tc.regime = parse_regime(o.regime);
  tc.seed = o.seed;
  std::vector<int> sources;
  for (int d = 0; d < sc.num_domains(); ++d) {
    if (d != o.target) sources.push_back(d);
  }
  if (sources.empty() || tc.batch_size % sources.size() != 0) {
    throw ConfigError("batch size must be divisible by the number of source domains");
  }
  return train(sc, sources, tc);
}

void cmd_train(const Options& o, std::ostream& out) {
  const Scenario sc = build_scenario(o);
  const TrainResult result = train_single_run(o, sc);
  const fs::path dir = output_dir(o);
  const fs::path log = o.log_path.empty() ? dir / "train.log" : fs::path(o.log_path);
  write_file(log, [&](std::ostream& f) { write_training_log(f, result); });
  const fs::path ckpt = o.checkpoint_path.empty() ? dir / "model.ckpt" : fs::path(o.checkpoint_path);
  save_checkpoint(ckpt, result.final_params.front());
  if (result.final_params.size() > 1) save_checkpoint(ckpt.string() + ".peer", result.final_params[1]);
  out << "regime=" << o.regime << " seed=" << o.seed << " steps=" << result.steps()
      << " target_accuracy=" << text::format_double(evaluate_accuracy(result.model(), sc, o.target))
      << '\n';
  out << "wrote " << log.string() << " and " << ckpt.string() << '\n';
}

void cmd_dg(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = build_experiment(o, "dg", "source_only,fnn,cfnn");
  write_report(o, run_dg_experiment(cfg), out);
}

void cmd_catshift(const Options& o, std::ostream& out) {
  ExperimentConfig cfg = build_experiment(o, "catshift", "source_only,fnn,cfnn");
  cfg.category_shift = o.remove.empty() ? default_category_shift() : parse_removal(o.remove);
  write_report(o, run_category_shift_experiment(cfg), out);
}

void cmd_sweep(const Options& o, std::ostream& out) {
  ExperimentConfig cfg = build_experiment(o, "sweep", "fnn,cfnn");
  cfg.delta_r_values = parse_list<double>(
      o.delta_r_values, [](std::string_view v) { return text::parse_double(v); }, "delta_r");
  const SweepResult result = run_sensitivity_sweep(cfg);
  write_report(o, result.report, out);
  const fs::path dir = output_dir(o);
  write_file(dir / "sweep.csv", [&](std::ostream& f) { write_sweep_csv(f, result.rows); });
  write_sweep_csv(out, result.rows);
}

void cmd_embed(const Options& o, std::ostream& out) {
  const Scenario sc = build_scenario(o);
  ModelParams params;
  if (!o.checkpoint_path.empty()) {
    try {
      params = load_checkpoint(o.checkpoint_path);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  } else {
    params = train_single_run(o, sc).model();
  }
  const fs::path path = o.out_path.empty() ? output_dir(o) / "embeddings.csv" : fs::path(o.out_path);
  export_embeddings(params, sc, path);
  out << "wrote " << sc.samples.size() << " embeddings to " << path.string() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Feature-norm domain generalization experiments on synthetic scenarios", "fnndg"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* generate = app.add_subcommand("generate", "Write a scenario file");
  auto* train_cmd = app.add_subcommand("train", "Train one regime with one seed");
  auto* dg = app.add_subcommand("dg", "Leave-one-domain-out experiment");
  auto* catshift = app.add_subcommand("catshift", "Category-shift experiment with transfer gain");
  auto* sweep = app.add_subcommand("sweep", "Delta_r sensitivity sweep");
  auto* embed = app.add_subcommand("embed", "Export feature embeddings");
  for (auto* cmd : {generate, train_cmd, dg, catshift, sweep, embed}) {
    cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    add_common(*cmd, o);
  }
  generate->add_option("--out", o.out_path, "Scenario file path");
  for (auto* cmd : {train_cmd, embed}) {
    cmd->add_option("--regime", o.regime, "source_only, fnn or cfnn");
    cmd->add_option("--seed", o.seed, "Training seed");
    cmd->add_option("--checkpoint", o.checkpoint_path,
                    cmd == embed ? "Checkpoint to embed with (trains one otherwise)"
                                 : "Checkpoint output path");
  }
  train_cmd->add_option("--log", o.log_path, "Per-step training log path");
  embed->add_option("--out", o.out_path, "Embedding dump path");
  for (auto* cmd : {dg, catshift, sweep}) {
    cmd->add_option("--regime", o.regimes, "Comma-separated regimes");
    cmd->add_option("--seeds", o.seeds, "Comma-separated training seeds");
  }
  catshift->add_option("--remove", o.remove, "Removed classes, e.g. 0:0,1;1:2,3;2:0,4");
  sweep->add_option("--delta-r-values", o.delta_r_values, "Comma-separated delta_r values");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (*generate) cmd_generate(o, out);
    if (*train_cmd) cmd_train(o, out);
    if (*dg) cmd_dg(o, out);
    if (*catshift) cmd_catshift(o, out);
    if (*sweep) cmd_sweep(o, out);
    if (*embed) cmd_embed(o, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace fnndg::cli
