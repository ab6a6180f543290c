#include "fairvfl/data/synthetic.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/rng.hpp"

#include <cmath>
#include <numeric>

namespace fairvfl::data {

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "synthetic spec: " + m); };
  if (samples < 10) fail("need at least 10 samples");
  if (numeric_fields + categorical_fields == 0) fail("need at least one non-proxy field");
  if (categorical_fields > 0 && categorical_cardinality < 2) fail("categorical cardinality must be >= 2");
  if (sensitive_classes.empty()) fail("need at least one sensitive feature");
  for (int c : sensitive_classes) {
    if (c < 2) fail("sensitive features need at least 2 classes");
  }
  if (!(bias_strength >= 0.0 && bias_strength <= 1.0)) fail("bias strength must lie in [0, 1]");
  if (!(label_noise >= 0.0 && label_noise <= 0.05)) fail("label noise must lie in [0, 0.05]");
  if (!(val_fraction >= 0.0 && test_fraction > 0.0 && val_fraction + test_fraction < 1.0)) fail("bad split fractions");
}

nlohmann::json SyntheticSpec::to_json() const {
  return {{"samples", samples},
          {"numeric_fields", numeric_fields},
          {"categorical_fields", categorical_fields},
          {"categorical_cardinality", categorical_cardinality},
          {"sensitive_classes", sensitive_classes},
          {"bias_strength", bias_strength},
          {"label_noise", label_noise},
          {"val_fraction", val_fraction},
          {"test_fraction", test_fraction},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.samples = j.value("samples", s.samples);
  s.numeric_fields = j.value("numeric_fields", s.numeric_fields);
  s.categorical_fields = j.value("categorical_fields", s.categorical_fields);
  s.categorical_cardinality = j.value("categorical_cardinality", s.categorical_cardinality);
  s.sensitive_classes = j.value("sensitive_classes", s.sensitive_classes);
  s.bias_strength = j.value("bias_strength", s.bias_strength);
  s.label_noise = j.value("label_noise", s.label_noise);
  s.val_fraction = j.value("val_fraction", s.val_fraction);
  s.test_fraction = j.value("test_fraction", s.test_fraction);
  s.seed = j.value("seed", s.seed);
  return s;
}

VerticalDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  auto rng = Rng::stream(spec.seed, "synthetic");
  const std::size_t n = spec.samples;

  VerticalDataset ds;
  ds.ids.resize(n);
  std::iota(ds.ids.begin(), ds.ids.end(), std::uint64_t{0});

  for (std::size_t i = 0; i < spec.sensitive_classes.size(); ++i) {
    SensitiveColumn col;
    col.name = "sensitive_" + std::to_string(i);
    col.num_classes = spec.sensitive_classes[i];
    for (int c = 0; c < col.num_classes; ++c) col.class_names.push_back("class_" + std::to_string(c));
    col.labels.resize(n);
    for (auto& y : col.labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(col.num_classes)));
    ds.sensitive.push_back(std::move(col));
  }

  for (std::size_t k = 0; k < spec.numeric_fields; ++k) {
    FieldColumn col;
    col.name = "num_" + std::to_string(k);
    col.kind = FieldKind::Numeric;
    col.values.resize(n);
    for (auto& v : col.values) v = rng.normal();
    ds.fields.push_back(std::move(col));
  }
  // Vocabulary slot 0 is <unk>; real categories occupy codes 1..cardinality.
  auto make_vocab = [](std::size_t cardinality) {
    Vocabulary v;
    for (std::size_t c = 0; c < cardinality; ++c) v.add("v" + std::to_string(c));
    return v;
  };
  for (std::size_t k = 0; k < spec.categorical_fields; ++k) {
    FieldColumn col;
    col.name = "cat_" + std::to_string(k);
    col.kind = FieldKind::Categorical;
    col.vocabulary = make_vocab(spec.categorical_cardinality);
    col.codes.resize(n);
    for (auto& c : col.codes) c = 1 + static_cast<int>(rng.below(spec.categorical_cardinality));
    ds.fields.push_back(std::move(col));
  }
  for (std::size_t i = 0; i < ds.sensitive.size(); ++i) {
    const auto& s = ds.sensitive[i];
    FieldColumn col;
    col.name = "proxy_" + std::to_string(i);
    col.kind = FieldKind::Categorical;
    col.vocabulary = make_vocab(static_cast<std::size_t>(s.num_classes));
    col.codes.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const int value = rng.bernoulli(spec.bias_strength)
                            ? s.labels[r]
                            : static_cast<int>(rng.below(static_cast<std::uint64_t>(s.num_classes)));
      col.codes[r] = 1 + value;
    }
    ds.fields.push_back(std::move(col));
  }

  // Task rule: sign of a fixed linear score over numeric fields plus a parity
  // term per categorical field. Proxy fields never enter the rule.
  ds.task_labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    double score = 0.0;
    for (std::size_t k = 0; k < spec.numeric_fields; ++k) {
      const double w = (k % 2 == 0 ? 1.0 : -1.0) / std::sqrt(1.0 + static_cast<double>(k));
      score += w * ds.fields[k].values[r];
    }
    for (std::size_t k = 0; k < spec.categorical_fields; ++k) {
      score += (ds.fields[spec.numeric_fields + k].codes[r] % 2 == 0) ? 0.5 : -0.5;
    }
    int y = score > 0.0 ? 1 : 0;
    if (rng.bernoulli(spec.label_noise)) y = 1 - y;
    ds.task_labels[r] = y;
  }

  const auto n_test = static_cast<std::size_t>(std::round(spec.test_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::round(spec.val_fraction * static_cast<double>(n)));
  ds.splits.resize(n, Split::Train);
  for (std::size_t r = n - n_test - n_val; r < n - n_test; ++r) ds.splits[r] = Split::Val;
  for (std::size_t r = n - n_test; r < n; ++r) ds.splits[r] = Split::Test;
  ds.validate();
  return ds;
}

}  // namespace fairvfl::data
