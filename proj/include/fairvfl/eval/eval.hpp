#pragma once

#include "fairvfl/data/dataset.hpp"
#include "fairvfl/nn/layers.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fairvfl::eval {

struct AttackerConfig {
  std::size_t hidden = 128;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 50;
  std::size_t patience = 3;
  double holdout_fraction = 0.1;

  nlohmann::json to_json() const;
  static AttackerConfig from_json(const nlohmann::json& j);
};

/// One probe: inputs are z-scored with the statistics of its training reps.
struct Attacker {
  nn::Mlp2 mlp;
  nn::RowVector mean;
  nn::RowVector scale;
  std::size_t epochs_trained = 0;

  std::vector<int> predict(const nn::Tensor2D& reps) const;
};

struct AttackerEnsemble {
  std::vector<Attacker> attackers;
  int num_classes = 0;
  std::size_t width = 0;
};

// Trains k attackers, attacker j seeded from (seed, j). Labels with a single
// class raise an evaluation error.
AttackerEnsemble train_attacker_ensemble(const nn::Tensor2D& reps, const std::vector<int>& labels, int num_classes,
                                         std::size_t k, std::uint64_t seed, const AttackerConfig& cfg = {});

struct F1Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population std across attackers
  std::vector<double> per_attacker;

  nlohmann::json to_json() const;
};

F1Summary attack_f1(const AttackerEnsemble& ensemble, const nn::Tensor2D& reps, const std::vector<int>& labels);

// Macro-F1 over the classes present in truth or predictions.
double macro_f1(const std::vector<int>& predicted, const std::vector<int>& truth);

struct TaskMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

TaskMetrics task_metrics(const std::vector<int>& predicted, const std::vector<int>& truth);

// Expected macro-F1 of predictions drawn independently from the label
// marginal (what a shuffled-label probe achieves): 1 / number of classes present.
double shuffled_label_baseline(const std::vector<int>& truth);

// Macro-F1 of always predicting the most frequent class.
double majority_baseline(const std::vector<int>& truth);

/// A categorical field probed from protected representations.
struct ProbeTarget {
  std::string name;
  data::FieldKind kind = data::FieldKind::Categorical;
  int num_classes = 0;
  std::vector<int> train;
  std::vector<int> test;
};

// Builds a probe target for a dataset field over the given row sets.
ProbeTarget probe_target(const data::VerticalDataset& ds, const std::string& field,
                         const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows);

// For each field, ensembles are trained on every protected representation and
// the F1 is averaged over representations and attackers. Numeric fields raise
// an evaluation error.
std::map<std::string, F1Summary> privacy_inference_attack(const std::vector<nn::Tensor2D>& train_protected,
                                                          const std::vector<nn::Tensor2D>& test_protected,
                                                          const std::vector<ProbeTarget>& fields, std::size_t k,
                                                          std::uint64_t seed, const AttackerConfig& cfg = {});

struct MetricsReport {
  double task_accuracy = 0.0;
  double task_f1 = 0.0;
  std::map<std::string, F1Summary> fairness;        // per sensitive feature, probing s
  std::map<std::string, double> fairness_baseline;  // shuffled-label baseline per feature
  std::map<std::string, F1Summary> privacy;         // per probed field, probing a_i
  std::map<std::string, double> privacy_baseline;
  std::size_t fairness_floats_per_round = 0;
  std::size_t training_rounds = 0;
  std::string config_fingerprint;

  void validate() const;  // every fraction in [0, 1]
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  std::string table_header() const;
  std::string table_row() const;
};

}  // namespace fairvfl::eval
