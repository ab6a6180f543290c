#include "fairvfl/error.hpp"
#include "fairvfl/rng.hpp"

#include <cmath>
#include <numbers>

namespace fairvfl {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Label: return "label";
    case ErrorKind::Config: return "config";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::Data: return "data";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "I/O";
    case ErrorKind::Vocabulary: return "vocabulary";
    case ErrorKind::Checkpoint: return "checkpoint";
    case ErrorKind::Evaluation: return "evaluation";
    case ErrorKind::Oracle: return "oracle";
  }
  return "unknown";
}

double Rng::laplace(double scale) noexcept {
  // u in (-0.5, 0.5); exclude the endpoint that maps to -inf.
  double u = uniform() - 0.5;
  while (u == -0.5) u = uniform() - 0.5;
  const double sign = u < 0.0 ? -1.0 : 1.0;
  return -scale * sign * std::log1p(-2.0 * std::abs(u));
}

double Rng::normal() noexcept {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fairvfl
