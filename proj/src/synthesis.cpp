#include "stratostab/synthesis.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace stratostab {

namespace {

std::vector<Matrix> adjacent_rotations(Index n, double sigma) {
  std::vector<Matrix> out;
  for (Index k = 0; k + 1 < n; ++k) {
    Matrix c = Matrix::Zero(n, n);
    c(k, k + 1) = Complex(-sigma, 0);
    c(k + 1, k) = Complex(sigma, 0);
    out.push_back(std::move(c));
  }
  return out;
}

double condition_number(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0.0;
  if (sv(sv.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / (sv(sv.size() - 1));
}

// Weighted two-pass Gram-Schmidt; returns the surviving orthonormal columns.
// `coeffs`, when present, tracks each candidate's expansion in an auxiliary
// basis through the same elimination steps.
RealMatrix gram_schmidt(const std::vector<RealVector>& candidates, const RealVector& w,
                        double drop_tol, std::vector<Vector>* coeffs_in,
                        std::vector<Vector>* coeffs_out) {
  std::vector<RealVector> kept;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    RealVector v = candidates[c];
    Vector coeff;
    if (coeffs_in) coeff = (*coeffs_in)[c];
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < kept.size(); ++k) {
        const double proj = (v.cwiseProduct(kept[k]).cwiseProduct(w)).sum();
        v -= proj * kept[k];
        if (coeffs_in) coeff -= proj * (*coeffs_out)[k];
      }
    }
    const double nr = weighted_norm(w, v);
    if (nr <= drop_tol) continue;
    v /= nr;
    kept.push_back(v);
    if (coeffs_in) coeffs_out->push_back(coeff / nr);
  }
  RealMatrix out(w.size(), static_cast<Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) out.col(static_cast<Index>(k)) = kept[k];
  return out;
}

}  // namespace

std::vector<LinearOp> FeedbackLaw::realized_maps() const {
  std::vector<LinearOp> maps;
  const Matrix right = weights.cast<Complex>().asDiagonal() * sensors;
  maps.reserve(noise.matrices.size());
  for (const auto& c : noise.matrices)
    maps.push_back(LinearOp::low_rank(actuators_masked, c, right));
  return maps;
}

SdeSystem FeedbackLaw::modal_system() const {
  SdeSystem sys;
  sys.dim = modal_drift.rows();
  sys.drift = LinearOp::dense(-modal_drift);
  for (const auto& c : noise.matrices) sys.diffusions.push_back(LinearOp::dense(c));
  sys.interpretation = Interpretation::Stratonovich;
  return sys;
}

NoiseDesign synthesize_noise_matrices(const Vector& lambda_u, double sigma) {
  const Index n = lambda_u.size();
  if (n == 0) throw ConfigError("synthesize_noise_matrices: empty unstable block");
  if (sigma < 0.0) throw ConfigError("synthesize_noise_matrices: sigma must be >= 0");
  double sum_re = 0.0;
  for (Index j = 0; j < n; ++j) sum_re += lambda_u(j).real();
  if (n == 1 && lambda_u(0).real() <= 0.0)
    throw ConfigError(
        "synthesize_noise_matrices: a single unstable mode cannot be stabilized by "
        "skew noise (trace condition unachievable)");
  if (sum_re <= 0.0)
    throw ConfigError("synthesize_noise_matrices: sum of real parts must be positive");

  NoiseDesign design;
  design.channels = static_cast<int>(n - 1);
  design.matrices = adjacent_rotations(n, sigma);
  design.sigma = sigma;
  return design;
}

NoiseDesign tune_noise_intensity(const Matrix& a_u, double target_rate,
                                 const TuneParams& params) {
  const Index n = a_u.rows();
  if (n == 0 || a_u.cols() != n) throw ConfigError("tune_noise_intensity: invalid block");
  const double trace_re = a_u.trace().real();
  if (trace_re <= 0.0)
    throw ConfigError("tune_noise_intensity: block trace must have positive real part");
  if (target_rate >= 0.0) throw ConfigError("tune_noise_intensity: target rate must be negative");
  const double bound = -trace_re / static_cast<double>(n);
  if (target_rate <= bound) {
    std::ostringstream msg;
    msg << "tune_noise_intensity: target " << target_rate
        << " is beyond the trace-average bound " << bound;
    throw ConfigError(msg.str());
  }

  double sigma0 = params.sigma0;
  if (sigma0 <= 0.0) {
    Eigen::JacobiSVD<Matrix> svd(a_u);
    sigma0 = 2.0 * svd.singularValues()(0);
  }

  const Matrix drift = -a_u;
  double best_rate = std::numeric_limits<double>::infinity();
  double best_sigma = 0.0;
  for (int d = 0; d <= params.max_doublings; ++d) {
    const double sigma = sigma0 * std::ldexp(1.0, d);
    SdeSystem sys;
    sys.dim = n;
    sys.drift = LinearOp::dense(drift);
    for (auto& c : adjacent_rotations(n, sigma)) sys.diffusions.push_back(LinearOp::dense(c));
    sys.interpretation = Interpretation::Stratonovich;
    const LyapunovEstimate est = estimate_lyapunov(sys, params.estimator);
    if (est.value < best_rate) {
      best_rate = est.value;
      best_sigma = sigma;
    }
    if (est.value + params.confidence * est.stderror <= target_rate) {
      NoiseDesign design;
      design.channels = static_cast<int>(n - 1);
      design.matrices = adjacent_rotations(n, sigma);
      design.sigma = sigma;
      design.achieved_rate = est.value;
      design.achieved_stderr = est.stderror;
      design.certified = true;
      return design;
    }
  }
  std::ostringstream msg;
  msg << "tune_noise_intensity: intensity cap reached without certifying target "
      << target_rate << "; best achieved rate " << best_rate << " at sigma " << best_sigma;
  throw NumericalError(msg.str());
}

ActuatorSet build_actuators(const SpectralData& spec, Index n_modes, const OperatorModel& model,
                            double tol, double max_condition) {
  if (n_modes < 1 || n_modes > spec.dim())
    throw ConfigError("build_actuators: mode count out of range");
  if (model.dim != spec.right_vectors.rows())
    throw ConfigError("build_actuators: model and spectrum dimensions differ");

  const Matrix dual = spec.left_vectors.leftCols(n_modes);
  const RealVector wm = model.weights.cwiseProduct(model.mask);

  // gram(l, j) = <mask phi*_l, phi*_j>
  Matrix gram(n_modes, n_modes);
  for (Index l = 0; l < n_modes; ++l)
    for (Index j = 0; j < n_modes; ++j)
      gram(l, j) = weighted_inner(wm, dual.col(l), dual.col(j));

  ActuatorSet act;
  act.gram = gram;
  act.condition_number = condition_number(gram);
  if (!(act.condition_number < max_condition)) {
    std::ostringstream msg;
    msg << "build_actuators: actuator Gram is numerically singular (condition "
        << act.condition_number << "); the mask may contain too few grid points";
    throw NumericalError(msg.str());
  }
  act.alpha = gram.inverse();
  act.actuators = dual * act.alpha.transpose();

  double worst = 0.0;
  for (Index i = 0; i < n_modes; ++i) {
    const Vector masked = act.actuators.col(i).cwiseProduct(model.mask.cast<Complex>());
    for (Index j = 0; j < n_modes; ++j) {
      const Complex g = weighted_inner(model.weights, masked, dual.col(j));
      worst = std::max(worst, std::abs(g - (i == j ? Complex(1, 0) : Complex(0, 0))));
    }
  }
  act.pairing_residual = worst;
  if (worst > tol) {
    std::ostringstream msg;
    msg << "build_actuators: pairing identity residual " << worst << " exceeds " << tol;
    throw NumericalError(msg.str());
  }
  return act;
}

FeedbackLaw build_feedback(const NoiseDesign& noise, const SpectralData& spec,
                           const ActuatorSet& act, const OperatorModel& model) {
  const Index n_modes = act.actuators.cols();
  if (n_modes > spec.dim() || model.dim != spec.right_vectors.rows())
    throw ConfigError("build_feedback: component dimensions do not match");
  for (const auto& c : noise.matrices)
    if (c.rows() != n_modes || c.cols() != n_modes)
      throw ConfigError("build_feedback: noise matrix dimension mismatch");

  FeedbackLaw law;
  law.kind = ControllerKind::Complex;
  law.noise = noise;
  law.sensors = spec.left_vectors.leftCols(n_modes);
  law.basis = spec.right_vectors.leftCols(n_modes);
  law.actuator_set = act;
  law.mask = model.mask;
  law.weights = model.weights;
  law.actuators_masked.resize(model.dim, n_modes);
  for (Index i = 0; i < n_modes; ++i)
    law.actuators_masked.col(i) = act.actuators.col(i).cwiseProduct(model.mask.cast<Complex>());
  law.modal_drift = Matrix(spec.eigenvalues.head(n_modes).asDiagonal());
  return law;
}

RealBasis build_real_basis(const SpectralData& spec, Index n_modes, double drop_tol) {
  if (!spec.generator_real)
    throw ConfigError("build_real_basis: requires a real generator");
  if (n_modes < 1 || n_modes > spec.dim())
    throw ConfigError("build_real_basis: mode count out of range");
  for (Index j = 0; j < n_modes; ++j) {
    const Index p = spec.pair_index[j];
    if (p >= n_modes)
      throw ConfigError("build_real_basis: leading block is not conjugate-closed");
  }

  // Candidates Re phi_j, Im phi_j with their expansions in the leading
  // eigenbasis, so A psi can later be formed from the eigenvalues alone.
  std::vector<RealVector> cands;
  std::vector<Vector> coeffs_in, coeffs_out;
  for (Index j = 0; j < n_modes; ++j) {
    const Index p = spec.pair_index[j];
    Vector e_re = Vector::Zero(n_modes);
    Vector e_im = Vector::Zero(n_modes);
    e_re(j) += Complex(0.5, 0);
    e_re(p) += Complex(0.5, 0);
    e_im(j) += Complex(0, -0.5);
    e_im(p) += Complex(0, 0.5);
    cands.push_back(spec.right_vectors.col(j).real());
    coeffs_in.push_back(e_re);
    cands.push_back(spec.right_vectors.col(j).imag());
    coeffs_in.push_back(e_im);
  }

  RealBasis basis;
  basis.psi = gram_schmidt(cands, spec.weights, drop_tol, &coeffs_in, &coeffs_out);
  if (basis.psi.cols() != n_modes) {
    std::ostringstream msg;
    msg << "build_real_basis: expected " << n_modes << " orthonormal survivors, got "
        << basis.psi.cols() << " (broken conjugate pairing upstream?)";
    throw NumericalError(msg.str());
  }

  const Matrix phi = spec.right_vectors.leftCols(n_modes);
  const Vector lambda = spec.eigenvalues.head(n_modes);
  basis.a_u_re.resize(n_modes, n_modes);
  for (Index j = 0; j < n_modes; ++j) {
    const Vector a_psi = phi * lambda.cwiseProduct(coeffs_out[j]);
    for (Index i = 0; i < n_modes; ++i) {
      const Vector psi_i = basis.psi.col(i).cast<Complex>();
      basis.a_u_re(i, j) = weighted_inner(spec.weights, a_psi, psi_i).real();
    }
  }
  return basis;
}

FeedbackLaw build_real_feedback(const RealBasis& basis, const SpectralData& spec,
                                const OperatorModel& model, const RealFeedbackOptions& options) {
  if (!model.is_real()) throw ConfigError("build_real_feedback: requires a real generator");
  const Index n_modes = basis.psi.cols();
  if (n_modes < 1) throw ConfigError("build_real_feedback: empty basis");

  // Real span of the dual block; it annihilates the stable complement, which
  // is what decouples the modal equations from X_s.
  std::vector<RealVector> cands;
  for (Index j = 0; j < n_modes; ++j) {
    cands.push_back(spec.left_vectors.col(j).real());
    cands.push_back(spec.left_vectors.col(j).imag());
  }
  const RealMatrix dual_span = gram_schmidt(cands, spec.weights, 1e-8, nullptr, nullptr);
  if (dual_span.cols() != n_modes)
    throw NumericalError("build_real_feedback: real dual space has wrong dimension");

  // Sensors s_j in the dual span with <psi_i, s_j> = delta_ij.
  RealMatrix pairing(n_modes, n_modes);
  for (Index i = 0; i < n_modes; ++i)
    for (Index k = 0; k < n_modes; ++k)
      pairing(i, k) =
          (basis.psi.col(i).cwiseProduct(dual_span.col(k)).cwiseProduct(spec.weights)).sum();
  if (!(condition_number(pairing.cast<Complex>()) < 1e12))
    throw NumericalError("build_real_feedback: degenerate pairing between the unstable "
                         "basis and its dual space");
  const RealMatrix sensors = dual_span * pairing.inverse();

  NoiseDesign design;
  const Matrix a_u_c = basis.a_u_re.cast<Complex>();
  if (options.sigma.has_value()) {
    if (n_modes == 1 && basis.a_u_re(0, 0) <= 0.0)
      throw ConfigError("build_real_feedback: single unstable mode cannot be stabilized");
    if (*options.sigma < 0.0)
      throw ConfigError("build_real_feedback: sigma must be >= 0");
    design.channels = static_cast<int>(n_modes - 1);
    design.sigma = *options.sigma;
    design.matrices = adjacent_rotations(n_modes, *options.sigma);
  } else if (options.target_rate.has_value()) {
    design = tune_noise_intensity(a_u_c, *options.target_rate, options.tune);
  } else {
    throw ConfigError("build_real_feedback: provide sigma or target_rate");
  }

  // Actuators from span{psi} paired against the sensors through the mask.
  const RealVector wm = model.weights.cwiseProduct(model.mask);
  RealMatrix gram(n_modes, n_modes);
  for (Index l = 0; l < n_modes; ++l)
    for (Index j = 0; j < n_modes; ++j)
      gram(l, j) = (basis.psi.col(l).cwiseProduct(sensors.col(j)).cwiseProduct(wm)).sum();

  ActuatorSet act;
  act.gram = gram.cast<Complex>();
  act.condition_number = condition_number(act.gram);
  if (!(act.condition_number < 1e12)) {
    std::ostringstream msg;
    msg << "build_real_feedback: actuator Gram is numerically singular (condition "
        << act.condition_number << ")";
    throw NumericalError(msg.str());
  }
  const RealMatrix alpha = gram.inverse();
  const RealMatrix actuators = basis.psi * alpha.transpose();
  act.alpha = alpha.cast<Complex>();
  act.actuators = actuators.cast<Complex>();

  double worst = 0.0;
  for (Index i = 0; i < n_modes; ++i) {
    const RealVector masked = actuators.col(i).cwiseProduct(model.mask);
    for (Index j = 0; j < n_modes; ++j) {
      const double g = (masked.cwiseProduct(sensors.col(j)).cwiseProduct(model.weights)).sum();
      worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  }
  act.pairing_residual = worst;
  if (worst > 1e-8) {
    std::ostringstream msg;
    msg << "build_real_feedback: pairing identity residual " << worst << " exceeds 1e-8";
    throw NumericalError(msg.str());
  }

  FeedbackLaw law;
  law.kind = ControllerKind::Real;
  law.noise = std::move(design);
  law.sensors = sensors.cast<Complex>();
  law.basis = basis.psi.cast<Complex>();
  law.actuator_set = act;
  law.mask = model.mask;
  law.weights = model.weights;
  law.actuators_masked.resize(model.dim, n_modes);
  for (Index i = 0; i < n_modes; ++i)
    law.actuators_masked.col(i) =
        (actuators.col(i).cwiseProduct(model.mask)).cast<Complex>();
  law.modal_drift = a_u_c;
  return law;
}

}  // namespace stratostab
