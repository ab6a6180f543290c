#include "fairvfl/cli/experiment.hpp"
#include "fairvfl/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using fairvfl::cli::ExperimentConfig;

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool ldp = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--preset", c.preset, "named preset: adult-fairvfl, adult-vfl, synthetic-smoke, synthetic-vfl");
  cmd->add_option("--seed", c.seed, "global seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_flag("--ldp", c.ldp, "perturb s before it reaches the task platform");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

// --config wins over --preset; the remaining flags override either.
ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    cfg = ExperimentConfig::read(c.config);
  } else if (!c.preset.empty()) {
    cfg = fairvfl::cli::preset(c.preset);
  } else {
    cfg = fairvfl::cli::preset("adult-fairvfl");
  }
  if (c.seed) cfg.set_seed(*c.seed);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.ldp) cfg.ldp.enabled = true;
  cfg.validate();
  return cfg;
}

fairvfl::cli::Progress progress_for(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << std::endl; };
}

void print_metrics(const fairvfl::eval::MetricsReport& m) {
  std::cout << m.to_json().dump(2) << "\n";
  std::cout << m.table_header() << "\n" << m.table_row() << "\n";
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const fairvfl::Error*>(&e)) {
    if (err->kind() == fairvfl::ErrorKind::Numeric) return 2;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertical federated learning simulator with adversarial debiasing"};
  app.require_subcommand(1);

  Common train_opts, attack_opts, audit_opts, sweep_opts;
  auto* train = app.add_subcommand("train", "train, checkpoint best-by-validation, evaluate");
  add_common(train, train_opts);

  auto* attack = app.add_subcommand("attack", "fairness and privacy probes on a checkpoint");
  add_common(attack, attack_opts);
  std::string checkpoint;
  attack->add_option("--checkpoint", checkpoint, "checkpoint file (default: <out>/checkpoint.bin)");

  auto* audit = app.add_subcommand("audit", "privacy-boundary audit of a transcript");
  add_common(audit, audit_opts);
  std::string transcript;
  audit->add_option("--transcript", transcript, "transcript file (default: <out>/transcript.ndjson)");

  auto* sweep = app.add_subcommand("sweep", "one train+attack per axis value");
  add_common(sweep, sweep_opts);
  std::string axis = "gamma_c";
  std::vector<double> values;
  std::size_t feature = 0;
  sweep->add_option("--axis", axis, "gamma_c | lambda | rho");
  sweep->add_option("--values", values, "axis values")->required()->delimiter(',');
  sweep->add_option("--feature", feature, "sensitive feature index for lambda sweeps");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = resolve(train_opts);
      const auto result = fairvfl::cli::cmd_train(cfg, progress_for(train_opts));
      print_metrics(result.metrics);
      std::cout << "artifacts in " << result.directory.string() << " (best epoch " << result.best_epoch
                << ", train " << result.train_seconds << " s, eval " << result.eval_seconds << " s)\n";
      if (result.audit_violations > 0) {
        std::cerr << "audit: " << result.audit_violations << " violations in the training transcript\n";
        return 1;
      }
      return 0;
    }
    if (attack->parsed()) {
      const auto cfg = resolve(attack_opts);
      const std::filesystem::path ckpt =
          checkpoint.empty() ? std::filesystem::path(cfg.output_dir) / "checkpoint.bin" : std::filesystem::path(checkpoint);
      print_metrics(fairvfl::cli::cmd_attack(cfg, ckpt, progress_for(attack_opts)));
      return 0;
    }
    if (audit->parsed()) {
      const auto cfg = resolve(audit_opts);
      const std::filesystem::path path = transcript.empty()
                                             ? std::filesystem::path(cfg.output_dir) / "transcript.ndjson"
                                             : std::filesystem::path(transcript);
      const auto rep = fairvfl::cli::cmd_audit(path, {cfg.ldp.enabled}, cfg.widths.protected_widths, std::cout);
      return rep.clean() ? 0 : 1;
    }
    if (sweep->parsed()) {
      const auto cfg = resolve(sweep_opts);
      const auto rows = fairvfl::cli::cmd_sweep(cfg, fairvfl::cli::parse_axis(axis), values,
                                                fairvfl::cli::sweep_threads_from_env(), feature,
                                                progress_for(sweep_opts));
      bool all_ok = true;
      for (const auto& r : rows) {
        if (r.ok) {
          std::cout << r.value << "\t" << r.result.metrics.table_row() << "\n";
        } else {
          all_ok = false;
          std::cout << r.value << "\tFAILED\t" << r.error << "\n";
        }
      }
      return all_ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
