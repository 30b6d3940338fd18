#pragma once

#include <utility>
#include <vector>

#include "stratostab/model.hpp"

namespace stratostab {

/// Full eigensystem of a generator and of its adjoint in the weighted inner
/// product, sorted ascending by real part (ties by |Im| then Im, so conjugate
/// pairs sit adjacently with the negative imaginary part first).
struct SpectralData {
  Vector eigenvalues;                  // lambda_j, repeated per multiplicity
  Matrix right_vectors;                // columns phi_j, unit weighted norm
  Matrix left_vectors;                 // columns phi*_j with A^adj phi*_j = conj(lambda_j) phi*_j
  std::vector<Index> pair_index;       // conjugate partner of each column (self if real)
  RealVector right_residuals;          // |A phi - lambda phi|_W per column
  RealVector left_residuals;
  RealVector weights;
  double tol = 0.0;
  bool generator_real = false;

  Index dim() const { return eigenvalues.size(); }
};

/// Leading unstable block: the minimal conjugate-closed set of eigenvalues
/// whose removal leaves a strictly stable remainder and whose real-part sum is
/// positive. The retained (phi_j, phi*_j) pairs are biorthonormalized, so
/// P_N x = sum_j <x, phi*_j> phi_j is the algebraic projector.
struct UnstableDecomposition {
  Index N = 0;
  Vector lambda_u;      // diag of A_u
  Matrix phi;           // n x N right block
  Matrix phi_star;      // n x N dual block, <phi_i, phi*_j> = delta_ij
  RealVector weights;
  double stable_rate = 0.0;  // Re lambda_{N+1}; +inf when N == dim
  double sum_re = 0.0;       // sum of Re lambda_j, j <= N
  bool already_stable = false;

  Matrix a_u() const { return Matrix(lambda_u.asDiagonal()); }
};

struct SemisimplicityReport {
  struct Defect {
    Complex eigenvalue;
    Index algebraic = 0;
    Index geometric = 0;
  };
  bool semisimple = true;
  std::vector<Defect> defects;
};

/// Hermitian positive-definite weight from A_s Q + Q A_s^* = gamma I on a
/// truncated stable block. renorm_ok records whether the re-normed product
/// satisfies Re<A_s x, x>_Q >= (gamma/2)|x|_Q^2 (fails when gamma exceeds
/// 2 Re lambda_{N+1}).
struct LyapunovWeight {
  Matrix q;
  double gamma = 0.0;
  double residual = 0.0;
  bool renorm_ok = false;
  double renorm_margin = 0.0;
};

/// tol <= 0 picks 1e-9 * (1 + |A|_inf). Throws NumericalError if any residual
/// exceeds the tolerance.
SpectralData eigendecompose(const OperatorModel& model, double tol = 0.0);

/// Rescales the left vectors of the leading block so the mutual Gram matrix is
/// the identity; degenerate eigenspaces are fixed by a block solve against the
/// cross-Gram matrix. Requires the leading eigenvalues to be semisimple.
SpectralData biorthonormalize(const SpectralData& spec, Index leading, double tol = 1e-8);

UnstableDecomposition select_unstable_index(const SpectralData& spec);

/// True iff each distinct eigenvalue among the leading N has numerical
/// eigenvector rank equal to its algebraic multiplicity.
SemisimplicityReport check_semisimple(const SpectralData& spec, Index n_leading,
                                      double tol = 1e-8);

/// Modal coordinates y_j = <x, phi*_j> and stable component x_s = x - sum y_j phi_j.
std::pair<Vector, Vector> project(const UnstableDecomposition& dec, const Vector& x);

/// Solves A Q + Q A^H = gamma I for dense A (complex Schur + back substitution).
Matrix solve_lyapunov_dense(const Matrix& a, double gamma);

/// Spec-level operation on the modal stable block diag(lambda_{N+1}, ...,
/// lambda_{N+trunc}); trunc <= 0 selects min(2N, dim - N).
LyapunovWeight solve_lyapunov(const UnstableDecomposition& dec, const SpectralData& spec,
                              double gamma, Index trunc = 0);

}  // namespace stratostab
