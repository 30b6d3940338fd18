#include "stratostab/rng.hpp"

#include <cmath>

namespace stratostab {
namespace rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> counter(std::uint64_t step, std::uint32_t path,
                                            std::uint32_t channel, std::uint32_t purpose) {
  return {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), path,
          channel ^ (purpose << 28)};
}

inline double to_unit_open(std::uint64_t bits) {
  // 53 significant bits mapped into (0, 1); never returns an endpoint.
  return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

double uniform(std::uint64_t seed, std::uint32_t path, std::uint64_t step,
               std::uint32_t channel, std::uint32_t purpose, int lane) {
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                            static_cast<std::uint32_t>(seed >> 32)};
  const auto out = philox4x32(counter(step, path, channel, purpose), key);
  const std::uint64_t bits = (lane == 0)
      ? (static_cast<std::uint64_t>(out[0]) << 32 | out[1])
      : (static_cast<std::uint64_t>(out[2]) << 32 | out[3]);
  return to_unit_open(bits);
}

double normal(std::uint64_t seed, std::uint32_t path, std::uint64_t step,
              std::uint32_t channel, std::uint32_t purpose) {
  const double u1 = uniform(seed, path, step, channel, purpose, 0);
  const double u2 = uniform(seed, path, step, channel, purpose, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

RealMatrix brownian_increments(std::uint64_t seed, std::uint32_t path, long steps,
                               int channels, double dt) {
  RealMatrix dw(steps, channels);
  const double sq = std::sqrt(dt);
  for (long s = 0; s < steps; ++s)
    for (int k = 0; k < channels; ++k)
      dw(s, k) = sq * normal(seed, path, static_cast<std::uint64_t>(s),
                             static_cast<std::uint32_t>(k));
  return dw;
}

RealMatrix coarsen_increments(const RealMatrix& fine, long factor) {
  if (factor < 1 || fine.rows() % factor != 0)
    throw ConfigError("coarsen_increments: step count not divisible by factor");
  RealMatrix out(fine.rows() / factor, fine.cols());
  for (long s = 0; s < out.rows(); ++s)
    out.row(s) = fine.middleRows(s * factor, factor).colwise().sum();
  return out;
}

Vector unit_vector(std::uint64_t seed, std::uint32_t path, Index dim, bool real_valued) {
  Vector x(dim);
  for (Index i = 0; i < dim; ++i) {
    const double re = normal(seed, path, static_cast<std::uint64_t>(i), 0, kPurposeInitialState);
    const double im = real_valued
        ? 0.0
        : normal(seed, path, static_cast<std::uint64_t>(i), 1, kPurposeInitialState);
    x(i) = Complex(re, im);
  }
  const double n = x.norm();
  if (n == 0.0) {
    x.setZero();
    x(0) = 1.0;
    return x;
  }
  return x / n;
}

}  // namespace rng
}  // namespace stratostab
