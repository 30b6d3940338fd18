#pragma once

#include <array>
#include <cstdint>

#include "stratostab/types.hpp"

namespace stratostab {

// Counter-based random numbers (Philox4x32-10). Every draw is a pure function
// of (seed, path, step, channel, purpose), so trajectories are reproducible
// independently of scheduling or evaluation order.
namespace rng {

// Stream purposes; keeps increment draws disjoint from initial-state draws.
enum : std::uint32_t {
  kPurposeIncrement = 0,
  kPurposeInitialState = 1,
};

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

/// Uniform draw in the open interval (0, 1).
double uniform(std::uint64_t seed, std::uint32_t path, std::uint64_t step,
               std::uint32_t channel, std::uint32_t purpose, int lane);

/// Standard normal keyed by (seed, path, step, channel, purpose).
double normal(std::uint64_t seed, std::uint32_t path, std::uint64_t step,
              std::uint32_t channel, std::uint32_t purpose = kPurposeIncrement);

/// Brownian increments dW(s, k) ~ N(0, dt), steps x channels.
RealMatrix brownian_increments(std::uint64_t seed, std::uint32_t path, long steps,
                               int channels, double dt);

/// Sums consecutive groups of `factor` rows; the coarse table drives the same
/// Brownian path at step size factor*dt.
RealMatrix coarsen_increments(const RealMatrix& fine, long factor);

/// Deterministic random unit vector (real components if `real_valued`).
Vector unit_vector(std::uint64_t seed, std::uint32_t path, Index dim, bool real_valued);

}  // namespace rng
}  // namespace stratostab
