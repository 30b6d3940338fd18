#pragma once

#include <optional>
#include <vector>

#include "stratostab/model.hpp"
#include "stratostab/sde.hpp"
#include "stratostab/spectral.hpp"

namespace stratostab {

/// Skew-symmetric noise matrices C^k for the modal system
/// dy + A_u y dt = sum_k C^k y o dbeta_k, all scaled by one intensity sigma.
struct NoiseDesign {
  int channels = 0;  // M = N - 1
  std::vector<Matrix> matrices;
  double sigma = 0.0;
  std::optional<double> achieved_rate;  // estimated top Lyapunov exponent
  double achieved_stderr = 0.0;
  bool certified = false;
};

struct ActuatorSet {
  Matrix gram;       // gram(l, j) = <mask phi*_l, phi*_j>
  Matrix alpha;      // alpha * gram = I
  Matrix actuators;  // column i: phi_i = sum_l alpha(i, l) phi*_l
  double condition_number = 0.0;
  double pairing_residual = 0.0;  // max |<mask phi_i, phi*_j> - delta_ij|
};

enum class ControllerKind { Complex, Real };

/// Feedback R_k(X) = sum_ij C^k_ij <X, sensor_j> actuator_i applied through the
/// mask. realized_maps() returns the rank-N state-space diffusion operators
/// B_k : X -> mask .* R_k(X).
struct FeedbackLaw {
  ControllerKind kind = ControllerKind::Complex;
  NoiseDesign noise;
  Matrix sensors;           // n x N, <basis_i, sensor_j> = delta_ij
  Matrix basis;             // n x N spanning the unstable subspace (phi or psi)
  Matrix actuators_masked;  // n x N, column i = mask .* actuator_i
  ActuatorSet actuator_set;
  RealVector mask;
  RealVector weights;
  Matrix modal_drift;  // N x N: diag(lambda_u) or the real block A_u_re

  Index n_modes() const { return sensors.cols(); }
  std::vector<LinearOp> realized_maps() const;
  SdeSystem modal_system() const;  // Eq. for y driven by the same channels
};

/// Orthonormal real basis of the unstable subspace built from
/// {Re phi_j, Im phi_j} plus the real representation matrix of the generator.
struct RealBasis {
  RealMatrix psi;     // n x N, weighted-orthonormal columns
  RealMatrix a_u_re;  // (i, j) = <A psi_j, psi_i>
};

/// Adjacent-plane rotation generators C^k = sigma (E_{k+1,k} - E_{k,k+1}),
/// k = 1..N-1. For N = 1 returns zero channels (valid only when the single
/// mode is already stable).
NoiseDesign synthesize_noise_matrices(const Vector& lambda_u, double sigma);

struct TuneParams {
  LyapunovParams estimator;
  double sigma0 = 0.0;  // <= 0: 2 * max |lambda_j|
  int max_doublings = 12;
  double confidence = 2.0;  // require value + confidence * stderr <= target
};

/// Doubles sigma until the estimated top exponent certifies at or below
/// target_rate. Works for any (not necessarily diagonal) unstable block with
/// positive real trace.
NoiseDesign tune_noise_intensity(const Matrix& a_u, double target_rate, const TuneParams& params);

/// Gram system on the masked subdomain; alpha = gram^-1; actuators from the
/// dual block. The pairing identity <mask phi_i, phi*_j> = delta_ij is a
/// mandatory postcondition.
ActuatorSet build_actuators(const SpectralData& spec, Index n_modes, const OperatorModel& model,
                            double tol = 1e-8, double max_condition = 1e12);

FeedbackLaw build_feedback(const NoiseDesign& noise, const SpectralData& spec,
                           const ActuatorSet& act, const OperatorModel& model);

/// Gram-Schmidt over {Re phi_j, Im phi_j} in the weighted product, dropping
/// near-zero residuals; requires a real generator and a conjugate-closed block.
RealBasis build_real_basis(const SpectralData& spec, Index n_modes, double drop_tol = 1e-8);

struct RealFeedbackOptions {
  std::optional<double> sigma;        // fixed intensity; skips tuning
  std::optional<double> target_rate;  // tune to this rate when sigma not given
  TuneParams tune;
};

/// Real-valued controller: actuators from span{psi}, sensors from the real
/// dual space span{Re phi*, Im phi*} paired so that <psi_i, sensor_j> =
/// delta_ij, noise tuned against the real block A_u_re.
FeedbackLaw build_real_feedback(const RealBasis& basis, const SpectralData& spec,
                                const OperatorModel& model, const RealFeedbackOptions& options);

}  // namespace stratostab
