#pragma once

#include <vector>

#include "stratostab/model.hpp"
#include "stratostab/sde.hpp"

namespace stratostab {

/// Empirical content of the almost-sure decay claim: per-path envelope
/// constants sup_t |X(t)| e^{gamma t} / |X(0)| plus fitted rates. A path
/// satisfies the envelope when its constant is finite and the envelope process
/// has stopped growing (its maximum over the second half of the horizon does
/// not exceed the first-half maximum).
struct DecayCertificate {
  double gamma = 0.0;       // rate the envelope was checked at
  double gamma_hat = 0.0;   // ensemble minimum of the per-path fitted rates
  double c_hat = 0.0;       // max over paths of the envelope constant
  int paths = 0;
  double fraction_satisfying = 0.0;
  double window = 0.5;
  bool pass = false;
};

struct MeanSquareDecay {
  double rate = 0.0;
  RealVector times;
  RealVector curve;  // ensemble average of |X_s(t)|^2
};

/// Least-squares slope of log |X(t)| over the final `window` fraction of the
/// horizon; positive return value means decay at that rate. Returns +inf when
/// the state hits exact zero inside the window.
double fit_decay_rate(const Trajectory& traj, double window = 0.5);

DecayCertificate certify_decay(const std::vector<Trajectory>& ensemble, double gamma,
                               double window = 0.5);

/// Exponential fit to the ensemble average of |X_s(t)|^2 (requires >= 8 paths
/// with recorded stable-part norms).
MeanSquareDecay mean_square_decay(const std::vector<Trajectory>& ensemble, double window = 0.5);

/// Deterministic growth rate of dX/dt + A X = 0 from x0 (positive = growth).
double baseline_growth(const OperatorModel& model, const Vector& x0, double horizon);

}  // namespace stratostab
