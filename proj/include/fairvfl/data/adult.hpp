#pragma once

#include "fairvfl/data/dataset.hpp"

#include <cstdint>
#include <filesystem>

namespace fairvfl::data {

struct AdultOptions {
  std::size_t train_val_count = 20000;
  std::size_t val_count = 2000;
  std::size_t test_count = 10000;
  std::uint64_t seed = 0;
};

// Five equal-width buckets over [17, 90]: [17,31) [31,45) [45,59) [59,73) [73,90].
// Ages below 17 fall in the first bucket and above 90 in the last.
inline constexpr int kAgeBuckets = 5;
int bucketize_age(double age);

/// Loads the UCI census-income records.
///
/// `path` is either a directory holding adult.data and adult.test (train/val
/// is sampled from the former and test from the latter) or a single file
/// from which all splits are sampled. Gender and age become sensitive labels,
/// leaving 12 input fields. Vocabularies and numeric statistics come from the
/// train split only; "?" is an ordinary category.
VerticalDataset load_adult(const std::filesystem::path& path, const AdultOptions& options = {});

}  // namespace fairvfl::data
