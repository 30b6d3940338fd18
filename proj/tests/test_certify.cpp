#include <doctest.h>

#include <cmath>

#include "stratostab/certify.hpp"
#include "stratostab/model.hpp"
#include "stratostab/spectral.hpp"

using namespace stratostab;

namespace {

// Synthetic trajectory with norms following a given function of time.
Trajectory synthetic(double horizon, Index samples, double (*fn)(double)) {
  Trajectory traj;
  traj.times.resize(samples);
  traj.norm_x.resize(samples);
  traj.norm_xu.resize(samples);
  traj.norm_xs.resize(samples);
  traj.states.resize(1, samples);
  for (Index i = 0; i < samples; ++i) {
    const double t = horizon * static_cast<double>(i) / static_cast<double>(samples - 1);
    traj.times(i) = t;
    traj.norm_x(i) = fn(t);
    traj.norm_xu(i) = 0.5 * fn(t);
    traj.norm_xs(i) = fn(t);
    traj.states(0, i) = Complex(fn(t), 0);
  }
  return traj;
}

double decay2(double t) { return std::exp(-2.0 * t); }
double grow04(double t) { return std::exp(0.4 * t); }
double decay3(double t) { return std::exp(-3.0 * t); }

}  // namespace

TEST_CASE("fit_decay_rate recovers exact exponentials") {
  CHECK(fit_decay_rate(synthetic(5.0, 200, decay2), 0.5) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit_decay_rate(synthetic(5.0, 200, grow04), 0.5) ==
        doctest::Approx(-0.4).epsilon(1e-9));
  CHECK(std::isinf(fit_decay_rate(synthetic(5.0, 200, [](double t) {
    return t > 4.0 ? 0.0 : 1.0;
  }))));
  CHECK_THROWS_AS(fit_decay_rate(synthetic(5.0, 12, decay2), 0.1), ConfigError);
}

TEST_CASE("fit is invariant under scaling of the initial condition") {
  const Trajectory a = synthetic(5.0, 100, decay2);
  Trajectory b = a;
  b.norm_x *= 37.5;
  CHECK(fit_decay_rate(a, 0.5) == doctest::Approx(fit_decay_rate(b, 0.5)));
}

TEST_CASE("certify_decay") {
  SUBCASE("decaying ensemble passes below its rate with C_hat near 1") {
    std::vector<Trajectory> ens(4, synthetic(10.0, 400, decay2));
    const DecayCertificate cert = certify_decay(ens, 1.0);
    CHECK(cert.pass);
    CHECK(cert.fraction_satisfying == 1.0);
    CHECK(cert.c_hat == doctest::Approx(1.0));
    CHECK(cert.gamma_hat == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("growing ensemble fails (envelopes diverge)") {
    std::vector<Trajectory> ens(4, synthetic(10.0, 400, grow04));
    const DecayCertificate cert = certify_decay(ens, 0.5);
    CHECK_FALSE(cert.pass);
    CHECK(cert.fraction_satisfying == 0.0);
  }
  SUBCASE("monotonicity: pass at gamma implies pass at gamma' < gamma with smaller C") {
    std::vector<Trajectory> ens(4, synthetic(10.0, 400, decay2));
    const DecayCertificate hi = certify_decay(ens, 1.5);
    const DecayCertificate lo = certify_decay(ens, 0.5);
    REQUIRE(hi.pass);
    CHECK(lo.pass);
    CHECK(lo.c_hat <= hi.c_hat);
  }
  SUBCASE("input validation") {
    std::vector<Trajectory> empty;
    CHECK_THROWS_AS(certify_decay(empty, 1.0), ConfigError);
    std::vector<Trajectory> ens(1, synthetic(10.0, 100, decay2));
    CHECK_THROWS_AS(certify_decay(ens, 0.0), ConfigError);
  }
}

TEST_CASE("mean_square_decay") {
  SUBCASE("exact synthetic e^{-3t} norms square to rate 6") {
    std::vector<Trajectory> ens(8, synthetic(5.0, 200, decay3));
    const MeanSquareDecay ms = mean_square_decay(ens);
    CHECK(ms.rate == doctest::Approx(6.0).epsilon(1e-9));
  }
  SUBCASE("fewer than 8 paths is an error") {
    std::vector<Trajectory> ens(7, synthetic(5.0, 200, decay3));
    CHECK_THROWS_AS(mean_square_decay(ens), ConfigError);
  }
}

TEST_CASE("baseline growth of the uncontrolled dynamics") {
  SUBCASE("unstable advection-diffusion grows at -Re lambda_1") {
    const OperatorModel model = build_advection_diffusion({128, 0.01, 0.0, -0.5});
    Vector x0 = Vector::Ones(model.dim);
    x0 /= model.norm(x0);
    const double rate = baseline_growth(model, x0, 25.0);
    const double oracle = -(0.01 * M_PI * M_PI - 0.5);  // continuum -lambda_1
    CHECK(rate == doctest::Approx(oracle).epsilon(0.03));
  }
  SUBCASE("stable model decays") {
    const OperatorModel model = build_advection_diffusion({64, 0.05, 0.0, 0.0});
    Vector x0 = Vector::Ones(model.dim);
    x0 /= model.norm(x0);
    CHECK(baseline_growth(model, x0, 10.0) < 0.0);
  }
  SUBCASE("stable-subspace start decays at the stable rate until rounding") {
    const OperatorModel model = build_advection_diffusion({96, 0.01, 0.0, -0.5});
    const SpectralData sd = eigendecompose(model);
    const UnstableDecomposition dec = select_unstable_index(sd);
    Vector x0 = Vector::Ones(model.dim);
    const auto [y, xs] = project(dec, x0);
    (void)y;
    Vector x = xs / model.norm(xs);
    // Short horizon: rounding has not yet re-excited the unstable modes.
    const double rate = baseline_growth(model, x, 6.0);
    CHECK(rate == doctest::Approx(-dec.stable_rate).epsilon(0.10));
  }
}
