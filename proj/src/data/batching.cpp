#include "fairvfl/data/batching.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/rng.hpp"

#include <algorithm>

namespace fairvfl::data {

std::vector<Batch> iterate_batches(const std::vector<std::uint64_t>& ids, std::size_t batch_size,
                                   std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw Error(ErrorKind::Config, "batch size must be positive");
  std::vector<std::uint64_t> order = ids;
  auto rng = Rng::stream(seed, "batches/epoch/" + std::to_string(epoch));
  rng.shuffle(order.begin(), order.end());
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (end - start < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<Batch> iterate_batches(const VerticalDataset& ds, Split split, std::size_t batch_size,
                                   std::uint64_t seed, std::size_t epoch) {
  return iterate_batches(ds.ids_in(split), batch_size, seed, epoch);
}

std::vector<Batch> sequential_batches(const std::vector<std::uint64_t>& ids, std::size_t batch_size) {
  if (batch_size == 0) throw Error(ErrorKind::Config, "batch size must be positive");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < ids.size(); start += batch_size) {
    const std::size_t end = std::min(ids.size(), start + batch_size);
    out.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(start), ids.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace fairvfl::data
