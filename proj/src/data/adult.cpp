#include "fairvfl/data/adult.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/rng.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

namespace fairvfl::data {
namespace {

constexpr std::size_t kColumns = 15;
constexpr std::array<const char*, kColumns> kColumnNames = {
    "age",           "workclass",      "fnlwgt",       "education",    "education-num",
    "marital-status", "occupation",    "relationship", "race",         "sex",
    "capital-gain",  "capital-loss",   "hours-per-week", "native-country", "income"};
constexpr std::size_t kAge = 0, kSex = 9, kIncome = 14;
constexpr std::array<bool, kColumns> kNumeric = {true,  false, true, false, true,  false, false, false,
                                                 false, false, true, true,  true,  false, false};

struct RawRecord {
  std::array<std::string, kColumns> cells;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& text, const std::filesystem::path& file, std::size_t line) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::Parse, file.string() + ":" + std::to_string(line) + ": expected a number, got '" + text + "'");
  }
  return value;
}

std::vector<RawRecord> read_records(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '|') continue;
    RawRecord rec;
    std::size_t col = 0, start = 0;
    while (true) {
      const auto comma = t.find(',', start);
      if (col >= kColumns) {
        throw Error(ErrorKind::Parse, file.string() + ":" + std::to_string(line_no) + ": too many fields");
      }
      rec.cells[col++] = trim(std::string_view(t).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (col != kColumns) {
      throw Error(ErrorKind::Parse, file.string() + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(kColumns) + " fields, found " + std::to_string(col));
    }
    auto& label = rec.cells[kIncome];
    if (!label.empty() && label.back() == '.') label.pop_back();
    if (label != ">50K" && label != "<=50K") {
      throw Error(ErrorKind::Parse, file.string() + ":" + std::to_string(line_no) + ": unknown income label '" + label + "'");
    }
    if (rec.cells[kSex] != "Male" && rec.cells[kSex] != "Female") {
      throw Error(ErrorKind::Parse, file.string() + ":" + std::to_string(line_no) + ": unknown sex '" + rec.cells[kSex] + "'");
    }
    for (std::size_t c = 0; c < kColumns; ++c) {
      if (kNumeric[c]) parse_number(rec.cells[c], file, line_no);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void take_shuffled(std::vector<RawRecord>& pool, std::size_t count, Rng& rng, const std::string& what) {
  if (pool.size() < count) {
    throw Error(ErrorKind::Data, what + " needs " + std::to_string(count) + " records, only " +
                                     std::to_string(pool.size()) + " available");
  }
  rng.shuffle(pool.begin(), pool.end());
  pool.resize(count);
}

}  // namespace

int bucketize_age(double age) {
  if (!(age >= 0.0 && age <= 130.0)) throw Error(ErrorKind::Data, "age " + std::to_string(age) + " outside [0, 130]");
  if (age < 31.0) return 0;
  if (age < 45.0) return 1;
  if (age < 59.0) return 2;
  if (age < 73.0) return 3;
  return 4;
}

VerticalDataset load_adult(const std::filesystem::path& path, const AdultOptions& options) {
  if (options.val_count > options.train_val_count) throw Error(ErrorKind::Config, "validation count exceeds train+val count");
  auto rng = Rng::stream(options.seed, "adult/sample");

  std::vector<RawRecord> train_val, test;
  if (std::filesystem::is_directory(path)) {
    train_val = read_records(path / "adult.data");
    test = read_records(path / "adult.test");
    take_shuffled(train_val, options.train_val_count, rng, "train+val sample");
    take_shuffled(test, options.test_count, rng, "test sample");
  } else {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::Io, "missing file " + path.string());
    auto pool = read_records(path);
    take_shuffled(pool, options.train_val_count + options.test_count, rng, "ADULT sample");
    train_val.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(options.train_val_count));
    test.assign(pool.begin() + static_cast<std::ptrdiff_t>(options.train_val_count), pool.end());
  }

  std::vector<const RawRecord*> rows;
  VerticalDataset ds;
  const std::size_t train_count = options.train_val_count - options.val_count;
  for (std::size_t i = 0; i < train_val.size(); ++i) {
    rows.push_back(&train_val[i]);
    ds.splits.push_back(i < train_count ? Split::Train : Split::Val);
  }
  for (const auto& r : test) {
    rows.push_back(&r);
    ds.splits.push_back(Split::Test);
  }
  const std::size_t n = rows.size();
  ds.ids.resize(n);
  std::iota(ds.ids.begin(), ds.ids.end(), std::uint64_t{0});

  for (std::size_t c = 0; c < kColumns; ++c) {
    if (c == kAge || c == kSex || c == kIncome) continue;
    FieldColumn col;
    col.name = kColumnNames[c];
    if (kNumeric[c]) {
      col.kind = FieldKind::Numeric;
      col.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) col.values[i] = std::stod(rows[i]->cells[c]);
      double sum = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < train_count; ++i) sum += col.values[i];
      col.mean = sum / static_cast<double>(train_count);
      for (std::size_t i = 0; i < train_count; ++i) sq += (col.values[i] - col.mean) * (col.values[i] - col.mean);
      col.stddev = std::sqrt(sq / static_cast<double>(train_count));
      if (col.stddev == 0.0) col.stddev = 1.0;
      for (auto& v : col.values) v = (v - col.mean) / col.stddev;
    } else {
      col.kind = FieldKind::Categorical;
      col.codes.resize(n);
      for (std::size_t i = 0; i < train_count; ++i) col.codes[i] = col.vocabulary.add(rows[i]->cells[c]);
      for (std::size_t i = train_count; i < n; ++i) col.codes[i] = col.vocabulary.lookup(rows[i]->cells[c], true);
    }
    ds.fields.push_back(std::move(col));
  }

  ds.task_labels.resize(n);
  SensitiveColumn gender{"gender", 2, {"Female", "Male"}, std::vector<int>(n)};
  SensitiveColumn age{"age", kAgeBuckets, {"17-30", "31-44", "45-58", "59-72", "73-90"}, std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    ds.task_labels[i] = rows[i]->cells[kIncome] == ">50K" ? 1 : 0;
    gender.labels[i] = rows[i]->cells[kSex] == "Male" ? 1 : 0;
    age.labels[i] = bucketize_age(std::stod(rows[i]->cells[kAge]));
  }
  ds.sensitive.push_back(std::move(gender));
  ds.sensitive.push_back(std::move(age));
  ds.validate();
  return ds;
}

}  // namespace fairvfl::data
