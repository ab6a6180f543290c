#include "support.hpp"

#include "fairvfl/data/adult.hpp"
#include "fairvfl/data/batching.hpp"
#include "fairvfl/error.hpp"
#include "fairvfl/eval/eval.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

using namespace fairvfl;
using namespace fairvfl::data;

namespace {

const VerticalDataset& adult() {
  static const VerticalDataset ds = load_adult(FAIRVFL_DATA_DIR);
  return ds;
}

// Plug-in mutual information (nats) between two code vectors.
double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0 / n;
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [k, p] : joint) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  return mi;
}

std::vector<int> at(const std::vector<int>& v, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

nn::Tensor2D one_hot(const std::vector<int>& codes, const std::vector<std::size_t>& rows, int width) {
  nn::Tensor2D t = nn::Tensor2D::Zero(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) t(static_cast<Eigen::Index>(i), codes[rows[i]]) = 1.0;
  return t;
}

// Mean attacker F1 on the raw proxy field of a synthetic set.
double proxy_attack_f1(double rho, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.samples = 3000;
  spec.bias_strength = rho;
  spec.seed = seed;
  const auto ds = generate_synthetic(spec);
  const auto& proxy = ds.field("proxy_0");
  const auto tr = ds.rows_in(Split::Train), te = ds.rows_in(Split::Test);
  const int width = static_cast<int>(proxy.cardinality());
  eval::AttackerConfig cfg;
  cfg.max_epochs = 10;
  const auto ens = eval::train_attacker_ensemble(one_hot(proxy.codes, tr, width), at(ds.sensitive[0].labels, tr), 2, 1,
                                                 seed, cfg);
  return eval::attack_f1(ens, one_hot(proxy.codes, te, width), at(ds.sensitive[0].labels, te)).mean;
}

}  // namespace

TEST_CASE("ADULT: 12 input fields, 2 sensitive features, split sizes") {
  const auto& ds = adult();
  CHECK(ds.fields.size() == 12);
  REQUIRE(ds.sensitive.size() == 2);
  const auto names = ds.sensitive_names();
  CHECK(std::set<std::string>(names.begin(), names.end()) == std::set<std::string>{"gender", "age"});
  for (const auto& f : ds.field_names()) {
    CHECK(f != "sex");
    CHECK(f != "age");
  }
  CHECK(ds.rows_in(Split::Train).size() == 18000);
  CHECK(ds.rows_in(Split::Val).size() == 2000);
  CHECK(ds.rows_in(Split::Test).size() == 10000);
  CHECK(ds.sensitive[ds.sensitive_index("age")].num_classes == kAgeBuckets);
  CHECK_NOTHROW(ds.validate());
}

TEST_CASE("ADULT: no input column reproduces the gender column") {
  const auto& ds = adult();
  const auto& gender = ds.sensitive[ds.sensitive_index("gender")].labels;
  for (const auto& f : ds.fields) {
    if (f.kind != FieldKind::Categorical) continue;
    // A column identical up to relabeling maps each code to exactly one gender.
    std::map<int, std::set<int>> seen;
    for (std::size_t r = 0; r < gender.size(); ++r) seen[f.codes[r]].insert(gender[r]);
    bool identical = seen.size() == 2;
    for (const auto& [code, g] : seen) identical = identical && g.size() == 1;
    CHECK_MESSAGE(!identical, f.name);
  }
}

TEST_CASE("ADULT: fixed seed gives identical split membership, other seeds differ") {
  AdultOptions o;
  o.seed = 3;
  const auto a = load_adult(FAIRVFL_DATA_DIR, o);
  const auto b = load_adult(FAIRVFL_DATA_DIR, o);
  CHECK(a.ids == b.ids);
  CHECK(a.splits == b.splits);
  for (std::size_t k = 0; k < a.fields.size(); ++k) {
    CHECK(a.fields[k].codes == b.fields[k].codes);
    CHECK(a.fields[k].values == b.fields[k].values);
  }
  // Ids are positional, so a different sample shows up in the records themselves.
  o.seed = 4;
  const auto c = load_adult(FAIRVFL_DATA_DIR, o);
  bool differs = false;
  for (std::size_t k = 0; k < a.fields.size(); ++k) {
    differs = differs || a.fields[k].codes != c.fields[k].codes || a.fields[k].values != c.fields[k].values;
  }
  CHECK(differs);
}

TEST_CASE("ADULT: numeric standardization uses train statistics only") {
  const auto& ds = adult();
  const auto tr = ds.rows_in(Split::Train), te = ds.rows_in(Split::Test);
  bool test_off = false;
  for (const auto& f : ds.fields) {
    if (f.kind != FieldKind::Numeric) continue;
    auto moments = [&](const std::vector<std::size_t>& rows) {
      double m = 0.0, v = 0.0;
      for (auto r : rows) m += f.values[r];
      m /= static_cast<double>(rows.size());
      for (auto r : rows) v += (f.values[r] - m) * (f.values[r] - m);
      return std::make_pair(m, std::sqrt(v / static_cast<double>(rows.size())));
    };
    const auto [m, s] = moments(tr);
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(s - 1.0) < 1e-6);
    const auto [mt, st] = moments(te);
    test_off = test_off || std::abs(mt) > 1e-6 || std::abs(st - 1.0) > 1e-6;
  }
  CHECK(test_off);
}

TEST_CASE("ADULT: every age bucket holds at least 2% of the train split") {
  const auto& ds = adult();
  const auto& age = ds.sensitive[ds.sensitive_index("age")];
  const auto tr = ds.rows_in(Split::Train);
  const auto hist = class_histogram(at(age.labels, tr), age.num_classes);
  for (auto h : hist) CHECK(static_cast<double>(h) >= 0.02 * static_cast<double>(tr.size()));
}

TEST_CASE("ADULT: missing files and malformed rows") {
  CHECK_THROWS_AS(load_adult("/nonexistent/adult"), Error);
  try {
    load_adult("/nonexistent/adult");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
  const auto dir = fvt::scratch_dir("adult_bad");
  {
    std::ofstream out(dir / "adult.data");
    out << "39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, "
           "United-States, <=50K\n";
    out << "50, Self-emp-not-inc, 83311, Bachelors, 13\n";
  }
  try {
    load_adult(dir / "adult.data");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("age buckets") {
  CHECK(bucketize_age(17) == 0);
  CHECK(bucketize_age(30.9) == 0);
  CHECK(bucketize_age(31) == 1);
  CHECK(bucketize_age(45) == 2);
  CHECK(bucketize_age(59) == 3);
  CHECK(bucketize_age(73) == 4);
  CHECK(bucketize_age(89) == 4);
  CHECK(bucketize_age(90) == 4);
  CHECK(bucketize_age(5) == 0);
  CHECK(bucketize_age(120) == 4);
  CHECK_THROWS_AS(bucketize_age(-1), Error);
  CHECK_THROWS_AS(bucketize_age(131), Error);
}

TEST_CASE("default ADULT assignment: 4/4/4 fields, a partition of the columns") {
  const auto& ds = adult();
  const auto pa = default_assignment(ds, 3, 0);
  const auto shards = partition_vertical(ds, pa);
  REQUIRE(shards.insensitive.size() == 3);
  std::multiset<std::string> all;
  for (const auto& s : shards.insensitive) {
    CHECK(s.fields().size() == 4);
    for (const auto& f : s.fields()) all.insert(f.name);
  }
  const auto names = ds.field_names();
  CHECK(all == std::multiset<std::string>(names.begin(), names.end()));
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == all.size());

  REQUIRE(shards.sensitive.size() == 2);
  const auto& g = shards.sensitive[pa.sensitive_to_platform.at("gender")];
  CHECK(g.column().name == "gender");
  const auto ids = ds.ids_in(Split::Train);
  const std::vector<std::uint64_t> few(ids.begin(), ids.begin() + 10);
  CHECK(g.labels(few).size() == 10);

  // Same seed, same layout; the manifest lists every field once.
  CHECK(default_assignment(ds, 3, 0).field_to_platform == pa.field_to_platform);
  const auto manifest = shard_manifest(shards);
  std::size_t listed = 0;
  for (const auto& entry : manifest["insensitive"]) listed += entry["fields"].size();
  CHECK(listed == 12);
  CHECK(PartitionAssignment::from_json(pa.to_json()).field_to_platform == pa.field_to_platform);
}

TEST_CASE("partition errors: unassigned, unknown and sensitive fields") {
  const auto ds = generate_synthetic(fvt::small_spec(1));
  auto pa = default_assignment(ds, 2, 1);
  auto missing = pa;
  missing.field_to_platform.erase(missing.field_to_platform.begin());
  CHECK_THROWS_AS(partition_vertical(ds, missing), Error);
  auto unknown = pa;
  unknown.field_to_platform["no_such_field"] = 0;
  CHECK_THROWS_AS(partition_vertical(ds, unknown), Error);
  auto out_of_range = pa;
  out_of_range.field_to_platform.begin()->second = 7;
  CHECK_THROWS_AS(partition_vertical(ds, out_of_range), Error);
  auto no_sensitive = pa;
  no_sensitive.sensitive_to_platform.clear();
  CHECK_THROWS_AS(partition_vertical(ds, no_sensitive), Error);
}

TEST_CASE("insensitive shards expose no sensitive column and reject unknown ids") {
  const auto ds = generate_synthetic(fvt::small_spec(2));
  const auto shards = partition_vertical(ds, default_assignment(ds, 2, 2));
  const auto sensitive = ds.sensitive_names();
  for (const auto& s : shards.insensitive) {
    for (const auto& f : s.fields()) CHECK(std::find(sensitive.begin(), sensitive.end(), f.name) == sensitive.end());
    const std::vector<std::uint64_t> bad{999999};
    CHECK_THROWS_AS(s.batch(bad), Error);
  }
}

TEST_CASE("synthetic: rho = 0 carries no information, rho = 1 copies the label") {
  SyntheticSpec spec;
  spec.samples = 10000;
  spec.bias_strength = 0.0;
  spec.seed = 5;
  auto ds = generate_synthetic(spec);
  CHECK(mutual_information(ds.field("proxy_0").codes, ds.sensitive[0].labels) < 0.01);

  spec.bias_strength = 1.0;
  ds = generate_synthetic(spec);
  const auto& proxy = ds.field("proxy_0");
  for (std::size_t r = 0; r < ds.size(); ++r) REQUIRE(proxy.codes[r] == 1 + ds.sensitive[0].labels[r]);
}

TEST_CASE("synthetic: task labels follow the rule with at most 5% noise, and are deterministic") {
  SyntheticSpec spec;
  spec.samples = 10000;
  spec.seed = 6;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.task_labels == b.task_labels);
  CHECK(a.ids == b.ids);
  // Oracle: the documented rule, recomputed from the generated fields.
  std::size_t flipped = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    double score = 0.0;
    for (std::size_t k = 0; k < spec.numeric_fields; ++k) {
      score += (k % 2 == 0 ? 1.0 : -1.0) / std::sqrt(1.0 + static_cast<double>(k)) *
               a.field("num_" + std::to_string(k)).values[r];
    }
    for (std::size_t k = 0; k < spec.categorical_fields; ++k) {
      score += a.field("cat_" + std::to_string(k)).codes[r] % 2 == 0 ? 0.5 : -0.5;
    }
    flipped += (score > 0.0 ? 1 : 0) != a.task_labels[r];
  }
  const double rate = static_cast<double>(flipped) / static_cast<double>(a.size());
  CHECK(rate <= 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / static_cast<double>(a.size())));
  CHECK(rate > 0.03);

  SyntheticSpec bad;
  bad.bias_strength = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SyntheticSpec{};
  bad.label_noise = 0.2;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(SyntheticSpec::from_json(spec.to_json()).to_json() == spec.to_json());
}

TEST_CASE("synthetic: a raw-proxy attacker reaches F1 >= 0.85 at rho = 0.9") {
  CHECK(proxy_attack_f1(0.9, 7) >= 0.85);
}

TEST_CASE("synthetic: raw-proxy attack F1 is non-decreasing in rho") {
  std::vector<double> f1;
  for (double rho : {0.0, 0.3, 0.6, 0.9}) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) sum += proxy_attack_f1(rho, 100 + seed);
    f1.push_back(sum / 5.0);
  }
  MESSAGE("proxy F1 by rho: " << f1[0] << " " << f1[1] << " " << f1[2] << " " << f1[3]);
  for (std::size_t k = 1; k < f1.size(); ++k) CHECK(f1[k] >= f1[k - 1]);
}

TEST_CASE("batching: seeded order, every sample once per epoch, tail of 1 dropped") {
  std::vector<std::uint64_t> ids(32 * 5 + 1);
  std::iota(ids.begin(), ids.end(), std::uint64_t{100});
  const auto a = iterate_batches(ids, 32, 9, 0);
  CHECK(a == iterate_batches(ids, 32, 9, 0));
  CHECK(a != iterate_batches(ids, 32, 9, 1));
  CHECK(a.size() == 5);
  for (const auto& b : a) CHECK(b.size() == 32);
  std::multiset<std::uint64_t> seen;
  for (const auto& b : a) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == ids.size() - 1);
  CHECK(std::set<std::uint64_t>(seen.begin(), seen.end()).size() == seen.size());

  ids.push_back(9999);  // tail of 2 is kept
  const auto c = iterate_batches(ids, 32, 9, 0);
  CHECK(c.size() == 6);
  CHECK(c.back().size() == 2);

  const auto seq = sequential_batches(ids, 32);
  std::size_t total = 0;
  for (const auto& b : seq) total += b.size();
  CHECK(total == ids.size());
  CHECK(seq.front().front() == 100);
}

TEST_CASE("vocabulary: unknown tokens") {
  Vocabulary v;
  CHECK(v.add("a") == 1);
  CHECK(v.add("a") == 1);
  CHECK(v.lookup("a", false) == 1);
  CHECK(v.lookup("zzz", true) == kUnknownCode);
  CHECK_THROWS_AS(v.lookup("zzz", false), Error);
}
