#include "fairvfl/nn/finite_difference.hpp"

#include "fairvfl/error.hpp"

#include <cmath>

namespace fairvfl::nn {

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::Oracle, "step size must be positive");
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe(k) = x(k) + h;
    const double up = f(probe);
    probe(k) = x(k) - h;
    const double down = f(probe);
    probe(k) = x(k);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorKind::Oracle, "non-finite function value at coordinate " + std::to_string(k));
    }
    grad(k) = (up - down) / (2.0 * h);
  }
  return grad;
}

GradientComparison compare_gradients(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric,
                                     double abs_floor) {
  if (analytic.size() != numeric.size()) {
    throw Error(ErrorKind::Dimension, "gradient length mismatch: " + std::to_string(analytic.size()) + " vs " +
                                          std::to_string(numeric.size()));
  }
  GradientComparison out;
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double diff = std::abs(analytic(k) - numeric(k));
    if (diff <= abs_floor) continue;
    const double rel = diff / std::max(std::abs(analytic(k)), std::abs(numeric(k)));
    if (rel > out.max_relative_error) {
      out.max_relative_error = rel;
      out.worst_index = k;
    }
  }
  return out;
}

}  // namespace fairvfl::nn
