#pragma once

#include <string>

#include "stratostab/types.hpp"

namespace stratostab {

/// Finite-dimensional evolution operator with the weighted inner product that
/// all downstream modules use. Sign convention: the uncontrolled dynamics is
/// dX/dt + generator * X = 0. Immutable after construction.
struct OperatorModel {
  Index dim = 0;
  Matrix generator;
  RealVector weights;  // strictly positive quadrature weights
  RealVector mask;     // 0/1 indicator of the control subdomain
  RealVector grid;     // coordinate of each state entry in [0, 1]
  std::string label;

  Complex inner(const Vector& x, const Vector& y) const { return weighted_inner(weights, x, y); }
  double norm(const Vector& x) const { return weighted_norm(weights, x); }
  bool is_real() const { return is_real_matrix(generator); }
};

struct AdvectionDiffusionSpec {
  Index n = 0;       // interior grid points on (0, 1), Dirichlet boundary
  double nu = 0.0;   // viscosity, > 0
  double f = 0.0;    // constant advection speed
  double c = 0.0;    // constant reaction coefficient
};

/// Central second/first differences on the uniform grid xi_i = i*h, h = 1/(n+1):
/// generator = -nu d2/dxi2 + f d/dxi + c. Weights are h, mask all ones.
OperatorModel build_advection_diffusion(const AdvectionDiffusionSpec& spec);

/// Wraps a matrix verbatim after validation (square, positive weights, binary
/// nonzero mask). Grid defaults to the uniform interior layout.
OperatorModel build_from_matrix(const Matrix& entries, const RealVector& weights,
                                const RealVector& mask, const std::string& label = "matrix");

/// Copy of the model with mask = 1 exactly on grid points with lo < xi < hi.
OperatorModel subdomain_mask(const OperatorModel& model, double lo, double hi);

}  // namespace stratostab
