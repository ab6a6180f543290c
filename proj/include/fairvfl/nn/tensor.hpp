#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fairvfl::nn {

// Batched rows: one sample per row, features along columns.
using Tensor2D = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

std::string shape_string(const Tensor2D& t);

// Throws a dimension error naming both shapes unless lhs.cols() == expected.
void require_cols(const Tensor2D& t, Index expected, const char* what);
void require_same_shape(const Tensor2D& a, const Tensor2D& b, const char* what);

bool all_finite(const Tensor2D& t) noexcept;

// Gathers the listed rows into a new tensor.
Tensor2D gather_rows(const Tensor2D& t, std::span<const std::size_t> rows);

// FNV-1a over the little-endian bytes of the values in row-major order.
std::uint64_t payload_digest(const Tensor2D& t) noexcept;

}  // namespace fairvfl::nn
