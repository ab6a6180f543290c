#pragma once

#include "fairvfl/adversarial/adversarial.hpp"
#include "fairvfl/data/adult.hpp"
#include "fairvfl/data/partition.hpp"
#include "fairvfl/data/synthetic.hpp"
#include "fairvfl/eval/eval.hpp"
#include "fairvfl/models/bundle.hpp"
#include "fairvfl/protocol/federation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fairvfl::cli {

struct DatasetSource {
  std::string kind = "adult";  // "adult" | "synthetic"
  std::string adult_path;      // empty: bundled data directory
  data::AdultOptions adult;
  data::SyntheticSpec synthetic;

  nlohmann::json to_json() const;
  static DatasetSource from_json(const nlohmann::json& j);
};

struct ExperimentConfig {
  std::string name = "custom";
  DatasetSource dataset;
  std::size_t platforms = 3;
  std::optional<data::PartitionAssignment> partition;  // default: seeded shuffle
  std::uint64_t partition_seed = 0;
  models::RepWidths widths;
  models::ArchConfig arch;
  adversarial::LossWeights weights{{1e2, 1e1}, {0.25, 0.25}};
  bool fairness = true;
  protocol::LdpConfig ldp;
  protocol::LdpConfig gradient_dp{1.0, 8.0, false, true};
  nn::AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::size_t max_rounds = 0;  // 0: no cap
  std::size_t negative_pool = 5;
  std::uint64_t seed = 0;
  std::size_t attackers = 5;
  eval::AttackerConfig attacker;
  std::vector<std::string> privacy_fields{"education", "relationship"};
  bool privacy_probe = true;
  std::size_t eval_chunk = 1000;
  std::string output_dir = "runs/default";

  void validate() const;
  nlohmann::json to_json() const;  // canonical: key order fixed by the serializer
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
  // 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
  std::string fingerprint() const;

  // Reseeds the run (training, partition and data sampling).
  void set_seed(std::uint64_t s);
  protocol::FederationConfig federation() const;
};

// "adult-fairvfl", "adult-vfl", "synthetic-smoke", "synthetic-vfl".
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

std::filesystem::path default_adult_path();

/// Loaded data for one configuration.
struct Workspace {
  data::VerticalDataset dataset;
  data::PartitionAssignment assignment;
  data::Shards shards;
};

Workspace load_workspace(const ExperimentConfig& cfg);
models::ModelBundle make_bundle(const ExperimentConfig& cfg, const Workspace& ws);

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t rounds = 0;
  double task_loss = 0.0;
  std::vector<double> bias_disc;
  std::vector<double> adversarial;
  std::vector<double> contrastive_disc;
  double val_accuracy = 0.0;
};

struct RunResult {
  eval::MetricsReport metrics;
  std::filesystem::path directory;
  std::filesystem::path checkpoint;
  std::filesystem::path transcript;
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
  std::size_t audit_violations = 0;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;

  nlohmann::json to_json() const;
};

using Progress = std::function<void(const std::string&)>;

// Attack-based evaluation of a frozen bundle: task metrics on the test split,
// fairness probes on s, privacy probes on every a_i.
eval::MetricsReport evaluate_bundle(const ExperimentConfig& cfg, const Workspace& ws,
                                    const models::ModelBundle& bundle);

// Trains, keeps the best-validation bundle, evaluates, and writes config,
// checkpoint, transcript, curves and metrics under cfg.output_dir.
RunResult cmd_train(const ExperimentConfig& cfg, const Progress& progress = {});

eval::MetricsReport cmd_attack(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                               const Progress& progress = {});

struct AuditReport {
  std::vector<protocol::Violation> violations;
  std::map<std::string, std::size_t> counts;
  std::map<std::uint64_t, protocol::RoundTraffic> rounds;
  std::size_t traffic_mismatches = 0;
  bool clean() const { return violations.empty() && traffic_mismatches == 0; }
};

AuditReport cmd_audit(const std::filesystem::path& transcript, const protocol::AuditPolicy& policy,
                      const std::vector<std::size_t>& protected_widths, std::ostream& out);

enum class SweepAxis { Gamma, Lambda, Rho };
SweepAxis parse_axis(const std::string& s);
const char* to_string(SweepAxis axis);

// Applies one sweep value; lambda sweeps touch only `feature`.
ExperimentConfig sweep_point(const ExperimentConfig& base, SweepAxis axis, double value, std::size_t feature = 0);

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string error;
  RunResult result;
};

// One full train+attack per value; failures are recorded and the sweep goes
// on. Runs execute on up to `threads` worker threads.
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                                std::size_t threads, std::size_t feature = 0, const Progress& progress = {});

// FAIRVFL_THREADS, default 1.
std::size_t sweep_threads_from_env();

}  // namespace fairvfl::cli
