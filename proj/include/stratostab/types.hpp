#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stratostab {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when inputs violate a documented precondition or a config is malformed.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure fails (non-convergence, singular system,
/// blow-up, residual above tolerance).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Weighted inner product <x, y> = sum_i w_i x_i conj(y_i).
inline Complex weighted_inner(const RealVector& w, const Vector& x, const Vector& y) {
  return (y.conjugate().cwiseProduct(x).cwiseProduct(w.cast<Complex>())).sum();
}

inline double weighted_norm(const RealVector& w, const Vector& x) {
  return std::sqrt((x.cwiseAbs2().cwiseProduct(w)).sum());
}

inline double weighted_norm(const RealVector& w, const RealVector& x) {
  return std::sqrt((x.cwiseAbs2().cwiseProduct(w)).sum());
}

inline bool is_real_matrix(const Matrix& a) {
  return a.size() == 0 || a.imag().cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace stratostab
