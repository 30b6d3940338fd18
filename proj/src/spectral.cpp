#include "stratostab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace stratostab {

namespace {

// Adjoint in the weighted product: A^adj = W^-1 A^H W.
Matrix weighted_adjoint(const Matrix& a, const RealVector& w) {
  Matrix adj = a.adjoint();
  for (Index i = 0; i < adj.rows(); ++i)
    for (Index j = 0; j < adj.cols(); ++j) adj(i, j) *= w(j) / w(i);
  return adj;
}

struct RawEigen {
  Vector values;
  Matrix vectors;
};

RawEigen eigen_of(const Matrix& a) {
  RawEigen out;
  if (is_real_matrix(a)) {
    Eigen::EigenSolver<RealMatrix> es(a.real());
    if (es.info() != Eigen::Success)
      throw NumericalError("eigendecompose: real eigensolver failed to converge");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  } else {
    Eigen::ComplexEigenSolver<Matrix> es(a);
    if (es.info() != Eigen::Success)
      throw NumericalError("eigendecompose: complex eigensolver failed to converge");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

// Ascending by Re, then |Im|, then Im: conjugate pairs end up adjacent with
// the negative imaginary part first.
std::vector<Index> sort_order(const Vector& values) {
  std::vector<Index> order(values.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const Complex& x = values(a);
    const Complex& y = values(b);
    if (x.real() != y.real()) return x.real() < y.real();
    if (std::abs(x.imag()) != std::abs(y.imag()))
      return std::abs(x.imag()) < std::abs(y.imag());
    return x.imag() < y.imag();
  });
  return order;
}

// Unit weighted norm with the entry of largest modulus rotated to the positive
// real axis, so eigendecomposition output is deterministic.
void normalize_column(Vector& v, const RealVector& w) {
  const double n = weighted_norm(w, v);
  if (n == 0.0) throw NumericalError("eigendecompose: zero eigenvector");
  v /= n;
  Index imax = 0;
  double best = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v(i));
    if (m > best) {
      best = m;
      imax = i;
    }
  }
  const Complex pivot = v(imax);
  if (std::abs(pivot) > 0.0) v *= std::conj(pivot) / std::abs(pivot);
}

// Greedy matching of adjoint eigenpairs (mu ~ conj(lambda)) to the sorted
// right system; multiplicities make a direct sort unreliable.
std::vector<Index> match_left(const Vector& lambda, const Vector& mu) {
  const Index n = lambda.size();
  std::vector<bool> used(n, false);
  std::vector<Index> pick(n);
  for (Index j = 0; j < n; ++j) {
    Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < n; ++k) {
      if (used[k]) continue;
      const double d = std::abs(std::conj(mu(k)) - lambda(j));
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    used[best] = true;
    pick[j] = best;
  }
  return pick;
}

double spectrum_scale(const Vector& values) {
  double s = 0.0;
  for (Index i = 0; i < values.size(); ++i) s = std::max(s, std::abs(values(i)));
  return s;
}

// Clusters of numerically equal eigenvalues among the first `leading`,
// assuming the sorted order keeps equal values adjacent.
std::vector<std::pair<Index, Index>> cluster_leading(const Vector& values, Index leading,
                                                     double scale) {
  const double ctol = 1e-8 * (1.0 + scale);
  std::vector<std::pair<Index, Index>> clusters;
  Index start = 0;
  for (Index j = 1; j <= leading; ++j) {
    if (j == leading || std::abs(values(j) - values(start)) > ctol) {
      clusters.emplace_back(start, j);
      start = j;
    }
  }
  return clusters;
}

}  // namespace

SpectralData eigendecompose(const OperatorModel& model, double tol) {
  const Matrix& a = model.generator;
  if (tol <= 0.0) tol = 1e-9 * (1.0 + a.cwiseAbs().rowwise().sum().maxCoeff());

  RawEigen right = eigen_of(a);
  const Matrix adj = weighted_adjoint(a, model.weights);
  RawEigen left = eigen_of(adj);

  SpectralData sd;
  sd.weights = model.weights;
  sd.tol = tol;
  sd.generator_real = model.is_real();

  const auto order = sort_order(right.values);
  const Index n = model.dim;
  sd.eigenvalues.resize(n);
  sd.right_vectors.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    sd.eigenvalues(j) = right.values(order[j]);
    sd.right_vectors.col(j) = right.vectors.col(order[j]);
  }

  const auto pick = match_left(sd.eigenvalues, left.values);
  sd.left_vectors.resize(n, n);
  for (Index j = 0; j < n; ++j) sd.left_vectors.col(j) = left.vectors.col(pick[j]);

  for (Index j = 0; j < n; ++j) {
    Vector v = sd.right_vectors.col(j);
    normalize_column(v, sd.weights);
    sd.right_vectors.col(j) = v;
    Vector u = sd.left_vectors.col(j);
    normalize_column(u, sd.weights);
    sd.left_vectors.col(j) = u;
  }

  // Conjugate pairing. Real generators give exactly conjugate eigenvalues, and
  // we pin the partner's vectors to exact conjugates of the first.
  const double scale = spectrum_scale(sd.eigenvalues);
  const double pair_tol = sd.generator_real ? 0.0 : 1e-10 * (1.0 + scale);
  sd.pair_index.assign(n, Index{-1});
  for (Index j = 0; j < n; ++j) {
    if (sd.pair_index[j] >= 0) continue;
    if (std::abs(sd.eigenvalues(j).imag()) <= pair_tol) {
      sd.pair_index[j] = j;
      continue;
    }
    if (j + 1 < n &&
        std::abs(sd.eigenvalues(j + 1) - std::conj(sd.eigenvalues(j))) <=
            (sd.generator_real ? 0.0 : pair_tol)) {
      sd.pair_index[j] = j + 1;
      sd.pair_index[j + 1] = j;
      if (sd.generator_real) {
        sd.right_vectors.col(j + 1) = sd.right_vectors.col(j).conjugate();
        sd.left_vectors.col(j + 1) = sd.left_vectors.col(j).conjugate();
      }
    } else if (sd.generator_real) {
      throw NumericalError("eigendecompose: conjugate partner missing for a complex eigenvalue");
    } else {
      sd.pair_index[j] = j;  // complex generator, unpaired spectrum is fine
    }
  }

  sd.right_residuals.resize(n);
  sd.left_residuals.resize(n);
  double worst = 0.0;
  for (Index j = 0; j < n; ++j) {
    const Vector rr = a * sd.right_vectors.col(j) - sd.eigenvalues(j) * sd.right_vectors.col(j);
    const Vector lr =
        adj * sd.left_vectors.col(j) - std::conj(sd.eigenvalues(j)) * sd.left_vectors.col(j);
    sd.right_residuals(j) = weighted_norm(sd.weights, rr);
    sd.left_residuals(j) = weighted_norm(sd.weights, lr);
    worst = std::max({worst, sd.right_residuals(j), sd.left_residuals(j)});
  }
  if (worst > tol) {
    std::ostringstream msg;
    msg << "eigendecompose: residual " << worst << " exceeds tolerance " << tol;
    throw NumericalError(msg.str());
  }
  return sd;
}

SemisimplicityReport check_semisimple(const SpectralData& spec, Index n_leading, double tol) {
  if (n_leading > spec.dim())
    throw ConfigError("check_semisimple: N exceeds spectrum size");
  SemisimplicityReport report;
  const double scale = spectrum_scale(spec.eigenvalues);
  for (const auto& [lo, hi] : cluster_leading(spec.eigenvalues, n_leading, scale)) {
    const Index m = hi - lo;
    if (m <= 1) continue;
    Eigen::JacobiSVD<Matrix> svd(spec.right_vectors.middleCols(lo, m));
    const auto& sv = svd.singularValues();
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
      if (sv(i) > tol * sv(0)) ++rank;
    if (rank < m) {
      report.semisimple = false;
      report.defects.push_back({spec.eigenvalues(lo), m, rank});
    }
  }
  return report;
}

SpectralData biorthonormalize(const SpectralData& spec, Index leading, double tol) {
  if (leading < 0 || leading > spec.dim())
    throw ConfigError("biorthonormalize: leading block out of range");
  const auto ss = check_semisimple(spec, leading);
  if (!ss.semisimple) {
    std::ostringstream msg;
    msg << "biorthonormalize: defective eigenvalue in leading block (lambda = "
        << ss.defects.front().eigenvalue << ", algebraic " << ss.defects.front().algebraic
        << ", geometric " << ss.defects.front().geometric << ")";
    throw NumericalError(msg.str());
  }

  SpectralData out = spec;
  const double scale = spectrum_scale(spec.eigenvalues);
  for (const auto& [lo, hi] : cluster_leading(spec.eigenvalues, leading, scale)) {
    const Index m = hi - lo;
    const Matrix phi = spec.right_vectors.middleCols(lo, m);
    const Matrix psi = spec.left_vectors.middleCols(lo, m);
    Matrix gram(m, m);  // gram(i, k) = <phi_i, phi*_k>
    for (Index i = 0; i < m; ++i)
      for (Index k = 0; k < m; ++k)
        gram(i, k) = weighted_inner(spec.weights, phi.col(i), psi.col(k));
    Eigen::FullPivLU<Matrix> lu(gram);
    if (!lu.isInvertible())
      throw NumericalError("biorthonormalize: singular cross-Gram block "
                           "(violated semisimplicity or eigenvector defect)");
    const Matrix c = gram.conjugate().inverse();
    out.left_vectors.middleCols(lo, m) = psi * c;
  }

  // Postcondition: the leading mutual Gram is the identity within tol.
  double worst = 0.0;
  for (Index i = 0; i < leading; ++i)
    for (Index j = 0; j < leading; ++j) {
      const Complex g =
          weighted_inner(out.weights, out.right_vectors.col(i), out.left_vectors.col(j));
      worst = std::max(worst, std::abs(g - (i == j ? Complex(1, 0) : Complex(0, 0))));
    }
  if (worst > tol) {
    std::ostringstream msg;
    msg << "biorthonormalize: Gram residual " << worst << " exceeds tolerance " << tol;
    throw NumericalError(msg.str());
  }
  return out;
}

UnstableDecomposition select_unstable_index(const SpectralData& spec) {
  const Index n = spec.dim();
  // Walk conjugate-closed units; a pair is only ever taken whole.
  Index N = -1;
  double sum_re = 0.0;
  Index j = 0;
  if (n > 0 && spec.eigenvalues(0).real() > 0.0) {
    N = 0;
  } else {
    while (j < n) {
      const Index unit = (spec.pair_index[j] == j + 1) ? 2 : 1;
      for (Index k = 0; k < unit; ++k) sum_re += spec.eigenvalues(j + k).real();
      j += unit;
      const bool remainder_stable = (j == n) || (spec.eigenvalues(j).real() > 0.0);
      if (remainder_stable && sum_re > 0.0) {
        N = j;
        break;
      }
    }
    if (N < 0)
      throw NumericalError(
          "select_unstable_index: spectrum exhausted without achieving a positive "
          "real-part sum for the leading block");
  }

  UnstableDecomposition dec;
  dec.N = N;
  dec.already_stable = (N == 0);
  dec.weights = spec.weights;
  dec.stable_rate =
      (N < n) ? spec.eigenvalues(N).real() : std::numeric_limits<double>::infinity();
  if (N == 0) {
    dec.lambda_u.resize(0);
    dec.phi.resize(spec.right_vectors.rows(), 0);
    dec.phi_star.resize(spec.right_vectors.rows(), 0);
    dec.sum_re = 0.0;
    return dec;
  }
  const SpectralData bio = biorthonormalize(spec, N);
  dec.lambda_u = bio.eigenvalues.head(N);
  dec.phi = bio.right_vectors.leftCols(N);
  dec.phi_star = bio.left_vectors.leftCols(N);
  dec.sum_re = 0.0;
  for (Index k = 0; k < N; ++k) dec.sum_re += dec.lambda_u(k).real();
  return dec;
}

std::pair<Vector, Vector> project(const UnstableDecomposition& dec, const Vector& x) {
  Vector y(dec.N);
  for (Index j = 0; j < dec.N; ++j) y(j) = weighted_inner(dec.weights, x, dec.phi_star.col(j));
  Vector xs = x - dec.phi * y;
  return {std::move(y), std::move(xs)};
}

Matrix solve_lyapunov_dense(const Matrix& a, double gamma) {
  if (a.rows() != a.cols()) throw ConfigError("solve_lyapunov_dense: matrix must be square");
  if (gamma <= 0.0) throw ConfigError("solve_lyapunov_dense: gamma must be > 0");
  const Index n = a.rows();
  const double scale = a.cwiseAbs().maxCoeff();

  // Exact closed form for diagonal blocks: Q_ii = gamma / (2 Re a_ii).
  if (n > 0 && (a - Matrix(a.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0) {
    Matrix q = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      const double denom = 2.0 * a(i, i).real();
      if (denom == 0.0) throw NumericalError("solve_lyapunov_dense: singular Sylvester system");
      q(i, i) = gamma / denom;
    }
    return q;
  }

  Eigen::ComplexSchur<Matrix> schur(a);
  if (schur.info() != Eigen::Success)
    throw NumericalError("solve_lyapunov_dense: Schur factorization failed");
  const Matrix& u = schur.matrixU();
  const Matrix& t = schur.matrixT();

  // T Y + Y T^H = gamma I, columns by back substitution from the last.
  Matrix y = Matrix::Zero(n, n);
  Matrix shifted(n, n);
  for (Index k = n - 1; k >= 0; --k) {
    Vector rhs = Vector::Zero(n);
    rhs(k) = gamma;
    for (Index j = k + 1; j < n; ++j) rhs -= std::conj(t(k, j)) * y.col(j);
    shifted = t;
    shifted.diagonal().array() += std::conj(t(k, k));
    for (Index i = 0; i < n; ++i)
      if (std::abs(shifted(i, i)) <= 1e-14 * (1.0 + scale))
        throw NumericalError("solve_lyapunov_dense: singular Sylvester system "
                             "(eigenvalue pair summing to zero)");
    y.col(k) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  Matrix q = u * y * u.adjoint();
  return 0.5 * (q + Matrix(q.adjoint()));
}

LyapunovWeight solve_lyapunov(const UnstableDecomposition& dec, const SpectralData& spec,
                              double gamma, Index trunc) {
  if (gamma <= 0.0) throw ConfigError("solve_lyapunov: gamma must be > 0");
  const Index stable = spec.dim() - dec.N;
  if (stable <= 0) throw ConfigError("solve_lyapunov: no stable block (N == dim)");
  if (trunc <= 0) trunc = std::min<Index>(2 * std::max<Index>(dec.N, 1), stable);
  if (trunc > stable) throw ConfigError("solve_lyapunov: trunc exceeds stable block size");

  Matrix a_s = Matrix::Zero(trunc, trunc);
  for (Index i = 0; i < trunc; ++i) a_s(i, i) = spec.eigenvalues(dec.N + i);

  LyapunovWeight w;
  w.gamma = gamma;
  w.q = solve_lyapunov_dense(a_s, gamma);
  w.residual = (a_s * w.q + w.q * a_s.adjoint() - gamma * Matrix::Identity(trunc, trunc))
                   .cwiseAbs()
                   .maxCoeff();

  Eigen::SelfAdjointEigenSolver<Matrix> es(w.q);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("solve_lyapunov: Q is not positive definite "
                         "(gamma too large for this stable block)");

  // Re<A_s x, x>_Q >= (gamma/2)|x|_Q^2 iff Q A_s + A_s^H Q - gamma Q >= 0.
  const Matrix h = w.q * a_s + a_s.adjoint() * w.q - gamma * w.q;
  Eigen::SelfAdjointEigenSolver<Matrix> hs(0.5 * (h + Matrix(h.adjoint())));
  w.renorm_margin = hs.eigenvalues().minCoeff();
  w.renorm_ok = w.renorm_margin >= -1e-10 * (1.0 + gamma);
  return w;
}

}  // namespace stratostab
