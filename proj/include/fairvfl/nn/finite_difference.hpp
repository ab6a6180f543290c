#pragma once

#include <Eigen/Dense>

#include <functional>

namespace fairvfl::nn {

// Central-difference gradient estimate, (f(x + h e_k) - f(x - h e_k)) / 2h per
// coordinate. Test oracle: independent of every analytic backward pass.
Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double h);

struct GradientComparison {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = -1;
};

// Per-coordinate |a - n| / max(|a|, |n|), with coordinates where both are
// below abs_floor treated as exact matches.
GradientComparison compare_gradients(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric,
                                     double abs_floor = 1e-6);

}  // namespace fairvfl::nn
