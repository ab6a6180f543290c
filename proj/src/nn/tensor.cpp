#include "fairvfl/nn/tensor.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/rng.hpp"

#include <bit>
#include <cstring>

namespace fairvfl::nn {

std::string shape_string(const Tensor2D& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

void require_cols(const Tensor2D& t, Index expected, const char* what) {
  if (t.cols() != expected) {
    throw Error(ErrorKind::Dimension, std::string(what) + ": input " + shape_string(t) +
                                          " does not match expected width " + std::to_string(expected));
  }
}

void require_same_shape(const Tensor2D& a, const Tensor2D& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::Dimension,
                std::string(what) + ": shapes " + shape_string(a) + " and " + shape_string(b) + " differ");
  }
}

bool all_finite(const Tensor2D& t) noexcept { return t.allFinite(); }

Tensor2D gather_rows(const Tensor2D& t, std::span<const std::size_t> rows) {
  Tensor2D out(static_cast<Index>(rows.size()), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = t.row(static_cast<Index>(rows[i]));
  }
  return out;
}

std::uint64_t payload_digest(const Tensor2D& t) noexcept {
  static_assert(std::endian::native == std::endian::little, "digest assumes a little-endian host");
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  const auto* bytes = reinterpret_cast<const char*>(t.data());
  return fnv1a64(std::string_view(bytes, static_cast<std::size_t>(t.size()) * sizeof(double)), hash);
}

}  // namespace fairvfl::nn
