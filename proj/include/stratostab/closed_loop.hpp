#pragma once

#include "stratostab/sde.hpp"
#include "stratostab/synthesis.hpp"

namespace stratostab {

struct ClosedLoopParams {
  double dt = 0.0;  // <= 0: min(1e-3, 0.1/|A|_inf, 0.1/sigma^2) with the modal sigma
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t path = 0;
  long record_stride = 0;
};

/// One path of the full-state closed loop plus the reduced modal system driven
/// by the same Brownian increments (for decoupling cross-checks).
struct ClosedLoopRun {
  Trajectory full;   // norm_x / norm_xu / norm_xs in the model's weighted norm
  Trajectory modal;  // states are the modal coordinates of the direct integration
};

ClosedLoopRun simulate_closed_loop(const OperatorModel& model, const UnstableDecomposition& dec,
                                   const FeedbackLaw& law, const Vector& x0,
                                   const ClosedLoopParams& params);

/// Closed loop driven by piecewise-linear smoothed noise (see
/// wong_zakai_integrate).
Trajectory simulate_wong_zakai(const OperatorModel& model, const UnstableDecomposition& dec,
                               const FeedbackLaw& law, const Vector& x0,
                               const ClosedLoopParams& params, double smoothing_dt);

/// Modal coordinates of recorded states under the law's sensors (one column
/// per recorded time).
Matrix extract_modal(const FeedbackLaw& law, const Trajectory& traj);

/// Builds the full closed-loop system: drift = -generator (sparse when banded),
/// diffusions = realized feedback maps.
SdeSystem closed_loop_system(const OperatorModel& model, const FeedbackLaw& law);

}  // namespace stratostab
