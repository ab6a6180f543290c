#pragma once

#include "fairvfl/data/dataset.hpp"

#include <cstdint>
#include <vector>

namespace fairvfl::data {

using Batch = std::vector<std::uint64_t>;

// Seeded shuffle of the ids for the given epoch, cut into batches of
// batch_size; a trailing batch smaller than 2 is dropped.
std::vector<Batch> iterate_batches(const std::vector<std::uint64_t>& ids, std::size_t batch_size,
                                   std::uint64_t seed, std::size_t epoch);

std::vector<Batch> iterate_batches(const VerticalDataset& ds, Split split, std::size_t batch_size,
                                   std::uint64_t seed, std::size_t epoch);

// Fixed-order chunks for evaluation; keeps every id, including singletons.
std::vector<Batch> sequential_batches(const std::vector<std::uint64_t>& ids, std::size_t batch_size);

}  // namespace fairvfl::data
