#include "fairvfl/cli/experiment.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/nn/loss.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#ifndef FAIRVFL_DATA_DIR
#define FAIRVFL_DATA_DIR "data"
#endif

namespace fairvfl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

template <typename F>
auto config_field(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string(what) + ": " + e.what());
  }
}

json adam_json(const nn::AdamConfig& a) {
  return {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

nn::AdamConfig adam_from(const json& j) {
  nn::AdamConfig a;
  a.learning_rate = j.value("learning_rate", a.learning_rate);
  a.beta1 = j.value("beta1", a.beta1);
  a.beta2 = j.value("beta2", a.beta2);
  a.epsilon = j.value("epsilon", a.epsilon);
  return a;
}

}  // namespace

json DatasetSource::to_json() const {
  json j = {{"kind", kind}};
  if (kind == "adult") {
    j["path"] = adult_path;
    j["train_val_count"] = adult.train_val_count;
    j["val_count"] = adult.val_count;
    j["test_count"] = adult.test_count;
    j["sample_seed"] = adult.seed;
  } else {
    j["synthetic"] = synthetic.to_json();
  }
  return j;
}

DatasetSource DatasetSource::from_json(const json& j) {
  return config_field("dataset", [&] {
    DatasetSource d;
    d.kind = j.value("kind", d.kind);
    if (d.kind == "adult") {
      d.adult_path = j.value("path", d.adult_path);
      d.adult.train_val_count = j.value("train_val_count", d.adult.train_val_count);
      d.adult.val_count = j.value("val_count", d.adult.val_count);
      d.adult.test_count = j.value("test_count", d.adult.test_count);
      d.adult.seed = j.value("sample_seed", d.adult.seed);
    } else if (d.kind == "synthetic") {
      if (j.contains("synthetic")) d.synthetic = data::SyntheticSpec::from_json(j.at("synthetic"));
    } else {
      throw Error(ErrorKind::Config, "unknown dataset kind '" + d.kind + "'");
    }
    return d;
  });
}

void ExperimentConfig::validate() const {
  if (dataset.kind != "adult" && dataset.kind != "synthetic") {
    throw Error(ErrorKind::Config, "unknown dataset kind '" + dataset.kind + "'");
  }
  if (dataset.kind == "synthetic") {
    dataset.synthetic.validate();
    if (dataset.synthetic.sensitive_classes.size() != widths.protected_widths.size()) {
      throw Error(ErrorKind::Config, "synthetic data has " + std::to_string(dataset.synthetic.sensitive_classes.size()) +
                                         " sensitive features but " + std::to_string(widths.protected_widths.size()) +
                                         " protected widths are configured");
    }
  } else if (widths.protected_widths.size() != 2) {
    throw Error(ErrorKind::Config, "ADULT has 2 sensitive features (gender, age); configure 2 protected widths");
  }
  widths.validate();
  arch.validate(widths);
  weights.validate(widths.protected_widths.size());
  ldp.validate();
  gradient_dp.validate();
  if (platforms < 1) throw Error(ErrorKind::Config, "at least one insensitive platform is required");
  if (batch_size < 2) throw Error(ErrorKind::Config, "batch size must be >= 2");
  if (epochs < 1) throw Error(ErrorKind::Config, "epochs must be >= 1");
  if (negative_pool < 1) throw Error(ErrorKind::Config, "negative pool must be >= 1");
  if (attackers < 1) throw Error(ErrorKind::Config, "at least one attacker is required");
  if (eval_chunk < 1) throw Error(ErrorKind::Config, "eval chunk must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning rate must be > 0");
}

json ExperimentConfig::to_json() const {
  json j = {{"name", name},
            {"dataset", dataset.to_json()},
            {"platforms", platforms},
            {"partition_seed", partition_seed},
            {"widths", widths.to_json()},
            {"arch", arch.to_json()},
            {"weights", weights.to_json()},
            {"fairness", fairness},
            {"ldp", ldp.to_json()},
            {"gradient_dp", gradient_dp.to_json()},
            {"adam", adam_json(adam)},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"max_rounds", max_rounds},
            {"negative_pool", negative_pool},
            {"seed", seed},
            {"attackers", attackers},
            {"attacker", attacker.to_json()},
            {"privacy_fields", privacy_fields},
            {"privacy_probe", privacy_probe},
            {"eval_chunk", eval_chunk},
            {"output_dir", output_dir}};
  if (partition) j["partition"] = partition->to_json();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "experiment config must be an object");
  ExperimentConfig c;
  if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
  config_field("experiment", [&] {
    c.name = j.value("name", c.name);
    if (j.contains("dataset")) c.dataset = DatasetSource::from_json(j.at("dataset"));
    c.platforms = j.value("platforms", c.platforms);
    c.partition_seed = j.value("partition_seed", c.partition_seed);
    if (j.contains("partition")) c.partition = data::PartitionAssignment::from_json(j.at("partition"));
    if (j.contains("widths")) c.widths = models::RepWidths::from_json(j.at("widths"));
    if (j.contains("arch")) c.arch = models::ArchConfig::from_json(j.at("arch"));
    if (j.contains("weights")) c.weights = adversarial::LossWeights::from_json(j.at("weights"));
    c.fairness = j.value("fairness", c.fairness);
    if (j.contains("ldp")) c.ldp = protocol::LdpConfig::from_json(j.at("ldp"));
    if (j.contains("gradient_dp")) c.gradient_dp = protocol::LdpConfig::from_json(j.at("gradient_dp"));
    if (j.contains("adam")) c.adam = adam_from(j.at("adam"));
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    c.negative_pool = j.value("negative_pool", c.negative_pool);
    c.seed = j.value("seed", c.seed);
    c.attackers = j.value("attackers", c.attackers);
    if (j.contains("attacker")) c.attacker = eval::AttackerConfig::from_json(j.at("attacker"));
    c.privacy_fields = j.value("privacy_fields", c.privacy_fields);
    c.privacy_probe = j.value("privacy_probe", c.privacy_probe);
    c.eval_chunk = j.value("eval_chunk", c.eval_chunk);
    c.output_dir = j.value("output_dir", c.output_dir);
    return 0;
  });
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, "config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::write(const fs::path& path) const { write_text(path, to_json().dump(2) + "\n"); }

std::string ExperimentConfig::fingerprint() const {
  json j = to_json();
  j.erase("output_dir");
  return hex16(fnv1a64(j.dump()));
}

void ExperimentConfig::set_seed(std::uint64_t s) { seed = s; }

protocol::FederationConfig ExperimentConfig::federation() const {
  protocol::FederationConfig f;
  f.weights = weights;
  f.fairness = fairness;
  f.ldp = ldp;
  f.gradient_dp = gradient_dp;
  f.adam = adam;
  f.negative_pool = negative_pool;
  f.seed = seed;
  return f;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "adult-fairvfl") {
    c.output_dir = "runs/adult-fairvfl";
    return c;
  }
  if (name == "adult-vfl") {
    c.weights = adversarial::LossWeights::zeros(2);
    c.fairness = false;
    c.output_dir = "runs/adult-vfl";
    return c;
  }
  if (name == "synthetic-smoke" || name == "synthetic-vfl") {
    c.dataset.kind = "synthetic";
    c.dataset.synthetic.samples = 3000;
    c.dataset.synthetic.sensitive_classes = {2, 3};
    c.widths.unified = 64;
    c.widths.protected_widths = {16, 16};
    c.arch.embedding_width = 8;
    c.arch.encoder_hidden = 64;
    c.arch.attention_heads = 4;
    c.arch.pooling_hidden = 32;
    c.arch.head_hidden = 32;
    c.arch.mapper_hidden = 32;
    c.arch.contrastive_hidden = 32;
    c.arch.bias_hidden = 32;
    // Small model, short run: a larger step and a milder lambda than ADULT.
    c.weights = {{2.0, 2.0}, {0.25, 0.25}};
    c.adam.learning_rate = 3e-3;
    c.epochs = 5;
    c.privacy_fields = {"cat_0"};
    c.output_dir = "runs/" + name;
    if (name == "synthetic-vfl") {
      c.weights = adversarial::LossWeights::zeros(2);
      c.fairness = false;
    }
    return c;
  }
  throw Error(ErrorKind::Config, "unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"adult-fairvfl", "adult-vfl", "synthetic-smoke", "synthetic-vfl"}; }

fs::path default_adult_path() {
  if (const char* env = std::getenv("FAIRVFL_ADULT")) return env;
  return fs::path(FAIRVFL_DATA_DIR);
}

Workspace load_workspace(const ExperimentConfig& cfg) {
  cfg.validate();
  data::VerticalDataset ds = [&] {
    if (cfg.dataset.kind == "adult") {
      const fs::path path = cfg.dataset.adult_path.empty() ? default_adult_path() : fs::path(cfg.dataset.adult_path);
      return data::load_adult(path, cfg.dataset.adult);
    }
    return data::generate_synthetic(cfg.dataset.synthetic);
  }();
  data::PartitionAssignment assignment =
      cfg.partition ? *cfg.partition : data::default_assignment(ds, cfg.platforms, cfg.partition_seed);
  data::Shards shards = data::partition_vertical(ds, assignment);
  return Workspace{std::move(ds), std::move(assignment), std::move(shards)};
}

models::ModelBundle make_bundle(const ExperimentConfig& cfg, const Workspace& ws) {
  return models::ModelBundle::create(protocol::layout_for(ws.shards), cfg.widths, cfg.arch, cfg.seed);
}

json RunResult::to_json() const {
  json curve_json = json::array();
  for (const auto& e : curve) {
    curve_json.push_back({{"epoch", e.epoch},
                          {"rounds", e.rounds},
                          {"task_loss", e.task_loss},
                          {"bias_disc", e.bias_disc},
                          {"adversarial", e.adversarial},
                          {"contrastive_disc", e.contrastive_disc},
                          {"val_accuracy", e.val_accuracy}});
  }
  return {{"metrics", metrics.to_json()},
          {"directory", directory.string()},
          {"checkpoint", checkpoint.string()},
          {"transcript", transcript.string()},
          {"curve", curve_json},
          {"best_epoch", best_epoch},
          {"audit_violations", audit_violations},
          {"train_seconds", train_seconds},
          {"eval_seconds", eval_seconds}};
}

namespace {

std::vector<int> predict_labels(const nn::Tensor2D& probs) { return nn::argmax_rows(probs); }

// s for the given rows, computed in chunks.
nn::Tensor2D unified_for(const ExperimentConfig& cfg, const Workspace& ws, const models::ModelBundle& bundle,
                         const std::vector<std::uint64_t>& ids) {
  nn::Tensor2D out(static_cast<nn::Index>(ids.size()), static_cast<nn::Index>(cfg.widths.unified));
  for (std::size_t start = 0; start < ids.size(); start += cfg.eval_chunk) {
    const std::size_t end = std::min(ids.size(), start + cfg.eval_chunk);
    const std::span<const std::uint64_t> chunk(ids.data() + start, end - start);
    out.middleRows(static_cast<nn::Index>(start), static_cast<nn::Index>(end - start)) =
        protocol::compose_unified(bundle, ws.shards, chunk);
  }
  return out;
}

std::vector<int> rows_of(const std::vector<int>& column, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(column[r]);
  return out;
}

}  // namespace

eval::MetricsReport evaluate_bundle(const ExperimentConfig& cfg, const Workspace& ws,
                                    const models::ModelBundle& bundle) {
  const auto& ds = ws.dataset;
  const auto train_rows = ds.rows_in(data::Split::Train);
  const auto test_rows = ds.rows_in(data::Split::Test);
  const auto train_ids = ds.ids_in(data::Split::Train);
  const auto test_ids = ds.ids_in(data::Split::Test);

  eval::MetricsReport report;
  report.config_fingerprint = cfg.fingerprint();

  const nn::Tensor2D s_train = unified_for(cfg, ws, bundle, train_ids);
  const nn::Tensor2D s_test = unified_for(cfg, ws, bundle, test_ids);

  nn::Tensor2D served = s_test;
  if (cfg.ldp.enabled) {
    auto rng = Rng::stream(cfg.seed, "eval/ldp");
    served = protocol::ldp_perturb(s_test, cfg.ldp, rng);
  }
  const auto tm = eval::task_metrics(predict_labels(bundle.task_head.predict(served)), rows_of(ds.task_labels, test_rows));
  report.task_accuracy = tm.accuracy;
  report.task_f1 = tm.macro_f1;

  for (std::size_t i = 0; i < ds.sensitive.size(); ++i) {
    const auto& col = ds.sensitive[i];
    const auto y_train = rows_of(col.labels, train_rows);
    const auto y_test = rows_of(col.labels, test_rows);
    const auto ens = eval::train_attacker_ensemble(s_train, y_train, col.num_classes, cfg.attackers,
                                                   splitmix64(cfg.seed ^ fnv1a64("fairness/" + col.name)), cfg.attacker);
    report.fairness[col.name] = eval::attack_f1(ens, s_test, y_test);
    report.fairness_baseline[col.name] = eval::shuffled_label_baseline(y_test);
  }

  if (cfg.privacy_probe && !cfg.privacy_fields.empty()) {
    std::vector<nn::Tensor2D> a_train, a_test;
    for (std::size_t i = 0; i < bundle.sensitive_count(); ++i) {
      a_train.push_back(models::map_protected(bundle, s_train, i));
      a_test.push_back(models::map_protected(bundle, s_test, i));
    }
    std::vector<eval::ProbeTarget> targets;
    for (const auto& f : cfg.privacy_fields) targets.push_back(eval::probe_target(ds, f, train_rows, test_rows));
    report.privacy = eval::privacy_inference_attack(a_train, a_test, targets, cfg.attackers,
                                                    splitmix64(cfg.seed ^ fnv1a64("privacy")), cfg.attacker);
    for (const auto& t : targets) report.privacy_baseline[t.name] = eval::shuffled_label_baseline(t.test);
  }
  report.validate();
  return report;
}

RunResult cmd_train(const ExperimentConfig& cfg, const Progress& progress) {
  cfg.validate();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  Workspace ws = load_workspace(cfg);
  models::ModelBundle bundle = make_bundle(cfg, ws);
  protocol::Federation fed(ws.shards, bundle, cfg.federation());

  RunResult result;
  result.directory = cfg.output_dir;
  fs::create_directories(result.directory);
  cfg.write(result.directory / "config.json");

  const auto train_ids = ws.dataset.ids_in(data::Split::Train);
  const auto val_rows = ws.dataset.rows_in(data::Split::Val);
  const auto val_ids = ws.dataset.ids_in(data::Split::Val);
  std::vector<int> val_labels;
  for (auto r : val_rows) val_labels.push_back(ws.dataset.task_labels[r]);

  models::ModelBundle best = bundle;
  double best_acc = -1.0;
  std::size_t rounds = 0;
  const std::size_t m = bundle.sensitive_count();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.max_rounds > 0 && rounds >= cfg.max_rounds) break;
    EpochStats st;
    st.epoch = epoch;
    st.bias_disc.assign(m, 0.0);
    st.adversarial.assign(m, 0.0);
    st.contrastive_disc.assign(m, 0.0);
    for (const auto& batch : data::iterate_batches(train_ids, cfg.batch_size, cfg.seed, epoch)) {
      if (cfg.max_rounds > 0 && rounds >= cfg.max_rounds) break;
      const auto r = fed.run_training_round(batch);
      ++rounds;
      ++st.rounds;
      st.task_loss += r.task_loss;
      for (std::size_t i = 0; i < m; ++i) {
        if (cfg.fairness) {
          st.bias_disc[i] += r.bias_disc[i];
          st.adversarial[i] += r.adversarial[i];
          st.contrastive_disc[i] += r.contrastive_disc[i];
        }
      }
    }
    if (st.rounds > 0) {
      const double k = static_cast<double>(st.rounds);
      st.task_loss /= k;
      for (std::size_t i = 0; i < m; ++i) {
        st.bias_disc[i] /= k;
        st.adversarial[i] /= k;
        st.contrastive_disc[i] /= k;
      }
    }
    std::vector<int> pred;
    for (std::size_t start = 0; start < val_ids.size(); start += cfg.eval_chunk) {
      const std::size_t end = std::min(val_ids.size(), start + cfg.eval_chunk);
      const auto p = predict_labels(fed.serve(std::span<const std::uint64_t>(val_ids.data() + start, end - start)));
      pred.insert(pred.end(), p.begin(), p.end());
    }
    st.val_accuracy = val_labels.empty() ? 0.0 : eval::task_metrics(pred, val_labels).accuracy;
    if (st.val_accuracy > best_acc) {
      best_acc = st.val_accuracy;
      best = bundle;
      result.best_epoch = epoch;
    }
    std::ostringstream msg;
    msg << "epoch " << epoch << ": rounds " << st.rounds << ", task loss " << st.task_loss << ", val acc "
        << st.val_accuracy;
    say(msg.str());
    result.curve.push_back(std::move(st));
  }
  bundle = best;
  result.train_seconds = std::chrono::duration<double>(clock::now() - t0).count();

  result.checkpoint = result.directory / "checkpoint.bin";
  models::save_checkpoint(bundle, result.checkpoint);
  result.transcript = result.directory / "transcript.ndjson";
  fed.transcript().write(result.transcript);
  result.audit_violations = protocol::audit_transcript(fed.transcript(), fed.audit_policy()).size();

  const auto t1 = clock::now();
  say("evaluating");
  result.metrics = evaluate_bundle(cfg, ws, bundle);
  const auto traffic = protocol::per_round_traffic(fed.transcript());
  result.metrics.training_rounds = traffic.size();
  result.metrics.fairness_floats_per_round = traffic.empty() ? 0 : traffic.begin()->second.fairness_floats;
  result.eval_seconds = std::chrono::duration<double>(clock::now() - t1).count();

  write_text(result.directory / "metrics.json", result.metrics.to_json().dump(2) + "\n");
  write_text(result.directory / "metrics.tsv", result.metrics.table_header() + "\n" + result.metrics.table_row() + "\n");
  write_text(result.directory / "result.json", result.to_json().dump(2) + "\n");
  return result;
}

eval::MetricsReport cmd_attack(const ExperimentConfig& cfg, const fs::path& checkpoint, const Progress& progress) {
  cfg.validate();
  const models::RepWidths stored = models::read_checkpoint_widths(checkpoint);
  if (!(stored == cfg.widths)) {
    throw Error(ErrorKind::Checkpoint, "checkpoint widths " + stored.to_json().dump() +
                                           " do not match the configured widths " + cfg.widths.to_json().dump());
  }
  Workspace ws = load_workspace(cfg);
  models::ModelBundle bundle = make_bundle(cfg, ws);
  models::load_checkpoint(bundle, checkpoint);
  if (progress) progress("evaluating " + checkpoint.string());
  auto report = evaluate_bundle(cfg, ws, bundle);
  fs::create_directories(cfg.output_dir);
  write_text(fs::path(cfg.output_dir) / "attack.json", report.to_json().dump(2) + "\n");
  return report;
}

AuditReport cmd_audit(const fs::path& transcript_path, const protocol::AuditPolicy& policy,
                      const std::vector<std::size_t>& protected_widths, std::ostream& out) {
  const protocol::Transcript t = protocol::Transcript::read(transcript_path);
  AuditReport rep;
  rep.violations = protocol::audit_transcript(t, policy);
  for (const auto& v : rep.violations) {
    ++rep.counts[protocol::to_string(v.kind)];
    const auto& r = t.records()[v.record_index];
    out << "violation " << protocol::to_string(v.kind) << " at record " << v.record_index << " (round " << r.round
        << "): " << v.detail << "\n";
  }
  for (const auto& [kind, n] : rep.counts) out << "count " << kind << " " << n << "\n";
  rep.rounds = protocol::per_round_traffic(t);
  for (const auto& [round, traffic] : rep.rounds) {
    const std::size_t expected = protocol::expected_fairness_traffic(traffic.batch, protected_widths);
    const bool ok = traffic.fairness_floats == expected || traffic.fairness_floats == 0;
    if (!ok) ++rep.traffic_mismatches;
    if (!ok || round == rep.rounds.begin()->first) {
      out << "round " << round << " fairness traffic " << traffic.fairness_floats << " expected 4*" << traffic.batch
          << "*sum(H) = " << expected << (ok ? " ok" : " MISMATCH") << "\n";
    }
  }
  out << "records " << t.size() << ", training rounds " << rep.rounds.size() << ", fairness floats "
      << protocol::fairness_comm_cost(t) << ", violations " << rep.violations.size() << ", traffic mismatches "
      << rep.traffic_mismatches << "\n";
  return rep;
}

SweepAxis parse_axis(const std::string& s) {
  if (s == "gamma_c" || s == "gamma") return SweepAxis::Gamma;
  if (s == "lambda") return SweepAxis::Lambda;
  if (s == "rho") return SweepAxis::Rho;
  throw Error(ErrorKind::Config, "unknown sweep axis '" + s + "' (gamma_c | lambda | rho)");
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Gamma: return "gamma_c";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Rho: return "rho";
  }
  return "?";
}

ExperimentConfig sweep_point(const ExperimentConfig& base, SweepAxis axis, double value, std::size_t feature) {
  if (!std::isfinite(value) || value < 0.0) throw Error(ErrorKind::Config, "sweep values must be finite and >= 0");
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::Gamma:
      for (auto& g : c.weights.gamma) g = value;
      break;
    case SweepAxis::Lambda:
      if (feature >= c.weights.lambda.size()) throw Error(ErrorKind::Config, "lambda sweep feature out of range");
      c.weights.lambda[feature] = value;
      break;
    case SweepAxis::Rho:
      if (c.dataset.kind != "synthetic") throw Error(ErrorKind::Config, "rho sweeps need a synthetic dataset");
      if (value > 1.0) throw Error(ErrorKind::Config, "rho must be in [0, 1]");
      c.dataset.synthetic.bias_strength = value;
      break;
  }
  std::ostringstream dir;
  dir << to_string(axis) << "_" << value;
  c.output_dir = (fs::path(base.output_dir) / dir.str()).string();
  return c;
}

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                                std::size_t threads, std::size_t feature, const Progress& progress) {
  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto say = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    progress(msg);
  };
  auto worker = [&] {
    for (std::size_t k = next++; k < values.size(); k = next++) {
      rows[k].value = values[k];
      try {
        const ExperimentConfig c = sweep_point(base, axis, values[k], feature);
        say(std::string(to_string(axis)) + " = " + std::to_string(values[k]) + ": start");
        rows[k].result = cmd_train(c);
        rows[k].ok = true;
        say(std::string(to_string(axis)) + " = " + std::to_string(values[k]) + ": done");
      } catch (const std::exception& e) {
        rows[k].error = e.what();
        say(std::string(to_string(axis)) + " = " + std::to_string(values[k]) + ": failed: " + e.what());
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, values.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  fs::create_directories(base.output_dir);
  json table = json::array();
  std::string tsv;
  for (const auto& r : rows) {
    table.push_back({{"value", r.value}, {"ok", r.ok}, {"error", r.error},
                     {"metrics", r.ok ? r.result.metrics.to_json() : json(nullptr)}});
    if (r.ok) {
      if (tsv.empty()) tsv = std::string(to_string(axis)) + "\t" + r.result.metrics.table_header() + "\n";
      std::ostringstream line;
      line << r.value << "\t" << r.result.metrics.table_row() << "\n";
      tsv += line.str();
    }
  }
  write_text(fs::path(base.output_dir) / "sweep.json", table.dump(2) + "\n");
  write_text(fs::path(base.output_dir) / "sweep.tsv", tsv);
  return rows;
}

std::size_t sweep_threads_from_env() {
  const char* env = std::getenv("FAIRVFL_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (end == env || *end != '\0' || v == 0) throw Error(ErrorKind::Config, "FAIRVFL_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace fairvfl::cli
