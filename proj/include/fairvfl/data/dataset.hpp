#pragma once

#include "fairvfl/nn/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fairvfl::data {

enum class FieldKind { Categorical, Numeric };
enum class Split : std::uint8_t { Train, Val, Test };

const char* to_string(Split split) noexcept;

inline constexpr int kUnknownCode = 0;
inline constexpr std::string_view kUnknownToken = "<unk>";

/// String-to-index map with index 0 reserved for unknown values.
class Vocabulary {
 public:
  Vocabulary() : tokens_{std::string(kUnknownToken)} {}

  int add(const std::string& token);
  // Unknown tokens raise a vocabulary error unless allow_unknown is set, in
  // which case they map to kUnknownCode.
  int lookup(const std::string& token, bool allow_unknown) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct FieldColumn {
  std::string name;
  FieldKind kind = FieldKind::Numeric;
  std::vector<int> codes;       // categorical
  std::vector<double> values;   // numeric, standardized
  Vocabulary vocabulary;        // categorical
  double mean = 0.0;            // numeric standardization statistics (train split)
  double stddev = 1.0;

  std::size_t size() const noexcept { return kind == FieldKind::Categorical ? codes.size() : values.size(); }
  std::size_t cardinality() const noexcept { return vocabulary.size(); }
};

struct SensitiveColumn {
  std::string name;
  int num_classes = 2;
  std::vector<std::string> class_names;
  std::vector<int> labels;
};

/// Samples with fairness-insensitive input fields, task labels and
/// fairness-sensitive labels. Sensitive labels are never input fields.
struct VerticalDataset {
  std::vector<std::uint64_t> ids;
  std::vector<FieldColumn> fields;
  std::vector<int> task_labels;
  int num_task_classes = 2;
  std::vector<SensitiveColumn> sensitive;
  std::vector<Split> splits;

  std::size_t size() const noexcept { return ids.size(); }
  std::vector<std::size_t> rows_in(Split split) const;
  std::vector<std::uint64_t> ids_in(Split split) const;
  const FieldColumn& field(const std::string& name) const;
  std::size_t field_index(const std::string& name) const;
  std::size_t sensitive_index(const std::string& name) const;
  std::vector<std::string> field_names() const;
  std::vector<std::string> sensitive_names() const;

  // Checks column lengths, id uniqueness and label ranges; throws a data error.
  void validate() const;
};

struct FieldSchema {
  std::string name;
  FieldKind kind = FieldKind::Numeric;
  std::size_t cardinality = 0;  // categorical only, includes the unknown slot
};

/// One platform's feature slice for a batch of samples.
struct PlatformBatch {
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> categorical;
  nn::Tensor2D numeric;

  nn::Index rows() const noexcept { return std::max(categorical.rows(), numeric.rows()); }
};

// Integer-coded class histogram.
std::vector<std::size_t> class_histogram(const std::vector<int>& labels, int num_classes);

}  // namespace fairvfl::data
