#pragma once

#include <cstdint>
#include <vector>

#include "stratostab/linear_op.hpp"
#include "stratostab/rng.hpp"
#include "stratostab/types.hpp"

namespace stratostab {

enum class Interpretation { Stratonovich, Ito };

/// dX = drift * X dt + sum_k diffusions[k] * X (o or .) dbeta_k.
struct SdeSystem {
  LinearOp drift;
  std::vector<LinearOp> diffusions;
  Interpretation interpretation = Interpretation::Stratonovich;
  Index dim = 0;

  bool is_real() const;
};

SdeSystem make_system(const Matrix& drift, const std::vector<Matrix>& diffusions,
                      Interpretation interp = Interpretation::Stratonovich);

/// Stratonovich -> Ito: drift gains +1/2 sum_k B_k^2 (diffusions unchanged).
SdeSystem ito_correction(const SdeSystem& system);
/// Ito -> Stratonovich: removes the same correction.
SdeSystem stratonovich_correction(const SdeSystem& system);

struct Trajectory {
  RealVector times;      // recorded grid, starts at 0, ends at T
  Matrix states;         // dim x K recorded states
  RealVector norm_x;     // |X(t)| in the weighted norm (unit weights if none given)
  RealVector norm_xu;    // |P_N X(t)|, closed-loop runs only
  RealVector norm_xs;    // |X(t) - P_N X(t)|, closed-loop runs only
  std::uint64_t seed = 0;
  std::uint32_t path = 0;
  double dt = 0.0;
};

struct IntegrationParams {
  double dt = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t path = 0;
  long record_stride = 0;  // 0: chosen so at most ~4000 states are kept
  RealVector weights;      // empty: Euclidean norms
};

/// Step-size rule: dt = min(1e-3, 0.1/|D|, 0.1/max_k |B_k|^2).
double default_dt(const SdeSystem& system);

/// Heun (stochastic trapezoidal) for Stratonovich systems, Euler-Maruyama for
/// Ito systems. Increments are keyed by (seed, path, step, channel).
Trajectory integrate(const SdeSystem& system, const Vector& x0, const IntegrationParams& params);
Trajectory integrate(const SdeSystem& system, const Vector& x0, double dt, double horizon,
                     std::uint64_t seed, std::uint32_t path = 0);

/// Same schemes driven by a caller-supplied increment table (steps x channels);
/// used for refinement studies where coarse increments must sum fine ones.
Trajectory integrate_with_increments(const SdeSystem& system, const Vector& x0, double dt,
                                     const RealMatrix& increments,
                                     const RealVector& weights = {});

struct LyapunovParams {
  int paths = 64;
  double horizon = 50.0;
  double dt = 0.0;  // <= 0: default_dt
  int renorm_interval = 100;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
};

struct LyapunovEstimate {
  double value = 0.0;
  double stderror = 0.0;
  int paths = 0;
  double horizon = 0.0;
  int renorm_interval = 0;
};

/// Top Lyapunov exponent by long-horizon integration with periodic
/// renormalization. Integrates with a Strang splitting whose noise flows are
/// exact matrix exponentials: plain Heun inflates norms by O(|B|^4 dt) per unit
/// time under strong rotation noise, which would swamp the exponent long before
/// the stated tolerances are reached. Requires diagonalizable diffusions.
LyapunovEstimate estimate_lyapunov(const SdeSystem& system, const LyapunovParams& params);

/// Wong-Zakai: each beta_k is replaced by its piecewise-linear interpolation on
/// the smoothing grid and the resulting random ODE is integrated with the
/// deterministic Heun scheme. smoothing_dt must be an integer multiple of dt;
/// the Brownian skeleton is built from the dt-level increments, so different
/// smoothing levels share one path.
Trajectory wong_zakai_integrate(const SdeSystem& system, const Vector& x0, double dt,
                                double horizon, std::uint64_t seed, std::uint32_t path,
                                double smoothing_dt, const RealVector& weights = {});

}  // namespace stratostab
