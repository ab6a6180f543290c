#include "fairvfl/eval/eval.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/nn/adam.hpp"
#include "fairvfl/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace fairvfl::eval {

using nn::Index;
using nn::Tensor2D;

nlohmann::json AttackerConfig::to_json() const {
  return {{"hidden", hidden},         {"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"max_epochs", max_epochs}, {"patience", patience},           {"holdout_fraction", holdout_fraction}};
}

AttackerConfig AttackerConfig::from_json(const nlohmann::json& j) {
  AttackerConfig c;
  try {
    c.hidden = j.value("hidden", c.hidden);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("attacker: ") + e.what());
  }
  return c;
}

namespace {

Tensor2D standardize(const Tensor2D& x, const nn::RowVector& mean, const nn::RowVector& scale) {
  return (x.rowwise() - mean).array().rowwise() * scale.array();
}

std::vector<int> gather(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

double mean_loss(const nn::Mlp2& mlp, const Tensor2D& x, const std::vector<int>& y) {
  return nn::softmax_cross_entropy(mlp.forward(x), y).loss;
}

}  // namespace

std::vector<int> Attacker::predict(const Tensor2D& reps) const {
  return nn::argmax_rows(mlp.forward(standardize(reps, mean, scale)));
}

AttackerEnsemble train_attacker_ensemble(const Tensor2D& reps, const std::vector<int>& labels, int num_classes,
                                         std::size_t k, std::uint64_t seed, const AttackerConfig& cfg) {
  if (k < 1) throw Error(ErrorKind::Config, "attacker ensemble needs k >= 1");
  if (static_cast<std::size_t>(reps.rows()) != labels.size()) {
    throw Error(ErrorKind::Dimension, "attacker reps " + nn::shape_string(reps) + " vs " +
                                          std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 2) throw Error(ErrorKind::Evaluation, "attack target needs at least 2 classes");
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw Error(ErrorKind::Evaluation, "attack labels are degenerate (single class)");
  for (int c : present) {
    if (c < 0 || c >= num_classes) throw Error(ErrorKind::Label, "attack label " + std::to_string(c) + " out of range");
  }
  if (cfg.batch_size < 1 || cfg.max_epochs < 1) throw Error(ErrorKind::Config, "attacker batch size and epochs must be >= 1");
  if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0)) {
    throw Error(ErrorKind::Config, "attacker holdout fraction must be in (0, 1)");
  }

  const std::size_t n = labels.size();
  AttackerEnsemble ens;
  ens.num_classes = num_classes;
  ens.width = static_cast<std::size_t>(reps.cols());
  for (std::size_t j = 0; j < k; ++j) {
    const std::string tag = "attacker/" + std::to_string(j);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto split_rng = Rng::stream(seed, tag + "/split");
    split_rng.shuffle(order.begin(), order.end());
    const auto n_hold = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.holdout_fraction * static_cast<double>(n))), 1, n - 1);
    const std::vector<std::size_t> hold_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());

    Attacker att;
    const Tensor2D fit_raw = nn::gather_rows(reps, fit_idx);
    att.mean = fit_raw.colwise().mean();
    const Tensor2D centered = fit_raw.rowwise() - att.mean;
    att.scale = (centered.array().square().colwise().mean()).sqrt().matrix();
    for (Index c = 0; c < att.scale.size(); ++c) att.scale[c] = att.scale[c] > 1e-12 ? 1.0 / att.scale[c] : 1.0;
    const Tensor2D fit_x = standardize(fit_raw, att.mean, att.scale);
    const Tensor2D hold_x = standardize(nn::gather_rows(reps, hold_idx), att.mean, att.scale);
    const std::vector<int> fit_y = gather(labels, fit_idx);
    const std::vector<int> hold_y = gather(labels, hold_idx);

    auto init_rng = Rng::stream(seed, tag + "/init");
    att.mlp = nn::Mlp2("attacker", reps.cols(), static_cast<Index>(cfg.hidden), num_classes, 0.0, init_rng);
    nn::AdamState adam(nn::AdamConfig{cfg.learning_rate});
    auto batch_rng = Rng::stream(seed, tag + "/batches");
    const auto blocks = att.mlp.blocks();

    nn::Mlp2 best = att.mlp;
    double best_loss = mean_loss(att.mlp, hold_x, hold_y);
    std::size_t stale = 0;
    std::vector<std::size_t> perm(fit_idx.size());
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      std::iota(perm.begin(), perm.end(), 0);
      batch_rng.shuffle(perm.begin(), perm.end());
      for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(perm.size(), start + cfg.batch_size);
        const std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                            perm.begin() + static_cast<std::ptrdiff_t>(end));
        const Tensor2D xb = nn::gather_rows(fit_x, rows);
        const std::vector<int> yb = gather(fit_y, rows);
        nn::MlpTrace trace;
        const auto lg = nn::softmax_cross_entropy(att.mlp.forward(xb, nn::ForwardMode::eval(), trace), yb);
        nn::zero_grads(blocks);
        att.mlp.backward(lg.grad, trace, nn::ParamGrads::Accumulate);
        nn::adam_update(blocks, adam);
      }
      ++att.epochs_trained;
      const double loss = mean_loss(att.mlp, hold_x, hold_y);
      if (loss < best_loss) {
        best_loss = loss;
        best = att.mlp;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
    att.mlp = std::move(best);
    ens.attackers.push_back(std::move(att));
  }
  return ens;
}

nlohmann::json F1Summary::to_json() const {
  return {{"mean", mean}, {"std", stddev}, {"per_attacker", per_attacker}};
}

namespace {

F1Summary summarize(std::vector<double> values) {
  F1Summary s;
  s.per_attacker = std::move(values);
  if (s.per_attacker.empty()) return s;
  const double n = static_cast<double>(s.per_attacker.size());
  s.mean = std::accumulate(s.per_attacker.begin(), s.per_attacker.end(), 0.0) / n;
  double var = 0.0;
  for (double v : s.per_attacker) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / n);
  return s;
}

}  // namespace

F1Summary attack_f1(const AttackerEnsemble& ensemble, const Tensor2D& reps, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(reps.cols()) != ensemble.width) {
    throw Error(ErrorKind::Dimension, "attack reps width " + std::to_string(reps.cols()) + " vs ensemble width " +
                                          std::to_string(ensemble.width));
  }
  std::vector<double> f1;
  for (const auto& a : ensemble.attackers) f1.push_back(macro_f1(a.predict(reps), labels));
  return summarize(std::move(f1));
}

double macro_f1(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorKind::Dimension, std::to_string(predicted.size()) + " predictions vs " +
                                          std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw Error(ErrorKind::Evaluation, "macro-F1 of an empty label set");
  std::map<int, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (predicted[k] == truth[k]) {
      ++counts[truth[k]][0];
    } else {
      ++counts[predicted[k]][1];
      ++counts[truth[k]][2];
    }
  }
  double sum = 0.0;
  for (const auto& [_, c] : counts) {
    const double denom = 2.0 * static_cast<double>(c[0]) + static_cast<double>(c[1] + c[2]);
    sum += denom > 0.0 ? 2.0 * static_cast<double>(c[0]) / denom : 0.0;
  }
  return sum / static_cast<double>(counts.size());
}

TaskMetrics task_metrics(const std::vector<int>& predicted, const std::vector<int>& truth) {
  TaskMetrics m;
  m.macro_f1 = macro_f1(predicted, truth);
  std::size_t hit = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) hit += predicted[k] == truth[k];
  m.accuracy = static_cast<double>(hit) / static_cast<double>(truth.size());
  return m;
}

double shuffled_label_baseline(const std::vector<int>& truth) {
  const std::set<int> present(truth.begin(), truth.end());
  if (present.empty()) throw Error(ErrorKind::Evaluation, "baseline of an empty label set");
  return 1.0 / static_cast<double>(present.size());
}

double majority_baseline(const std::vector<int>& truth) {
  if (truth.empty()) throw Error(ErrorKind::Evaluation, "baseline of an empty label set");
  std::map<int, std::size_t> hist;
  for (int y : truth) ++hist[y];
  const auto top = std::max_element(hist.begin(), hist.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first > b.first;
  });
  return macro_f1(std::vector<int>(truth.size(), top->first), truth);
}

ProbeTarget probe_target(const data::VerticalDataset& ds, const std::string& field,
                         const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
  const auto& col = ds.field(field);
  ProbeTarget t;
  t.name = field;
  t.kind = col.kind;
  if (col.kind != data::FieldKind::Categorical) return t;
  t.num_classes = static_cast<int>(col.cardinality());
  for (auto r : train_rows) t.train.push_back(col.codes[r]);
  for (auto r : test_rows) t.test.push_back(col.codes[r]);
  return t;
}

std::map<std::string, F1Summary> privacy_inference_attack(const std::vector<Tensor2D>& train_protected,
                                                          const std::vector<Tensor2D>& test_protected,
                                                          const std::vector<ProbeTarget>& fields, std::size_t k,
                                                          std::uint64_t seed, const AttackerConfig& cfg) {
  if (train_protected.size() != test_protected.size() || train_protected.empty()) {
    throw Error(ErrorKind::Evaluation, "privacy probe needs matching, non-empty train/test protected reps");
  }
  std::map<std::string, F1Summary> out;
  for (const auto& f : fields) {
    if (f.kind != data::FieldKind::Categorical) {
      throw Error(ErrorKind::Evaluation, "privacy probe on numeric field '" + f.name + "' (classification only)");
    }
    std::vector<double> all;
    for (std::size_t i = 0; i < train_protected.size(); ++i) {
      const auto probe_seed = splitmix64(seed ^ fnv1a64("privacy/" + f.name + "/" + std::to_string(i)));
      const auto ens = train_attacker_ensemble(train_protected[i], f.train, f.num_classes, k, probe_seed, cfg);
      const auto s = attack_f1(ens, test_protected[i], f.test);
      all.insert(all.end(), s.per_attacker.begin(), s.per_attacker.end());
    }
    out.emplace(f.name, summarize(std::move(all)));
  }
  return out;
}

void MetricsReport::validate() const {
  auto in_unit = [](double v, const std::string& what) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::Evaluation, what + " = " + std::to_string(v) + " outside [0, 1]");
  };
  in_unit(task_accuracy, "task accuracy");
  in_unit(task_f1, "task F1");
  for (const auto& [k, v] : fairness) in_unit(v.mean, "fairness F1 (" + k + ")");
  for (const auto& [k, v] : privacy) in_unit(v.mean, "privacy F1 (" + k + ")");
  for (const auto& [k, v] : fairness_baseline) in_unit(v, "fairness baseline (" + k + ")");
  for (const auto& [k, v] : privacy_baseline) in_unit(v, "privacy baseline (" + k + ")");
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json fair = nlohmann::json::object();
  for (const auto& [k, v] : fairness) fair[k] = v.to_json();
  nlohmann::json priv = nlohmann::json::object();
  for (const auto& [k, v] : privacy) priv[k] = v.to_json();
  return {{"task_accuracy", task_accuracy},
          {"task_f1", task_f1},
          {"fairness_f1", fair},
          {"fairness_baseline", fairness_baseline},
          {"privacy_f1", priv},
          {"privacy_baseline", privacy_baseline},
          {"comm", {{"fairness_floats_per_round", fairness_floats_per_round}, {"training_rounds", training_rounds}}},
          {"config_fingerprint", config_fingerprint}};
}

namespace {

F1Summary summary_from_json(const nlohmann::json& j) {
  F1Summary s;
  s.mean = j.at("mean").get<double>();
  s.stddev = j.at("std").get<double>();
  s.per_attacker = j.at("per_attacker").get<std::vector<double>>();
  return s;
}

}  // namespace

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.task_accuracy = j.at("task_accuracy").get<double>();
    r.task_f1 = j.at("task_f1").get<double>();
    for (const auto& [k, v] : j.at("fairness_f1").items()) r.fairness[k] = summary_from_json(v);
    r.fairness_baseline = j.at("fairness_baseline").get<std::map<std::string, double>>();
    for (const auto& [k, v] : j.at("privacy_f1").items()) r.privacy[k] = summary_from_json(v);
    r.privacy_baseline = j.at("privacy_baseline").get<std::map<std::string, double>>();
    r.fairness_floats_per_round = j.at("comm").at("fairness_floats_per_round").get<std::size_t>();
    r.training_rounds = j.at("comm").at("training_rounds").get<std::size_t>();
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("metrics report: ") + e.what());
  }
  return r;
}

std::string MetricsReport::table_header() const {
  std::ostringstream out;
  out << "fingerprint\ttask_accuracy\ttask_f1";
  for (const auto& [k, _] : fairness) out << "\tfairness_f1_" << k << "\tfairness_std_" << k;
  for (const auto& [k, _] : privacy) out << "\tprivacy_f1_" << k << "\tprivacy_std_" << k;
  out << "\tfairness_floats_per_round";
  return out.str();
}

std::string MetricsReport::table_row() const {
  std::ostringstream out;
  out.precision(6);
  out << config_fingerprint << '\t' << task_accuracy << '\t' << task_f1;
  for (const auto& [_, v] : fairness) out << '\t' << v.mean << '\t' << v.stddev;
  for (const auto& [_, v] : privacy) out << '\t' << v.mean << '\t' << v.stddev;
  out << '\t' << fairness_floats_per_round;
  return out.str();
}

}  // namespace fairvfl::eval
