#include <doctest.h>

#include <cmath>

#include "stratostab/sde.hpp"

using namespace stratostab;

namespace {

Matrix scalar(double v) {
  Matrix a(1, 1);
  a(0, 0) = Complex(v, 0);
  return a;
}

Matrix rotation2(double sigma) {
  Matrix j(2, 2);
  j << Complex(0, 0), Complex(-sigma, 0), Complex(sigma, 0), Complex(0, 0);
  return j;
}

}  // namespace

TEST_CASE("deterministic limit: Heun reproduces e^{-1} to 1e-6") {
  const SdeSystem sys = make_system(scalar(-1.0), {});
  const Trajectory traj = integrate(sys, Vector::Ones(1), 1e-3, 1.0, 7);
  CHECK(std::abs(traj.states(0, traj.times.size() - 1).real() - std::exp(-1.0)) < 1e-6);
  CHECK(traj.times(traj.times.size() - 1) == doctest::Approx(1.0));
}

TEST_CASE("geometric Stratonovich noise follows exp(beta_T) under refinement") {
  const SdeSystem sys = make_system(Matrix::Zero(1, 1), {scalar(1.0)});
  const double T = 1.0;
  double prev_gap = 0.0;
  for (int level = 0; level < 3; ++level) {
    const long steps = 512L << level;
    const double dt = T / static_cast<double>(steps);
    const RealMatrix fine = rng::brownian_increments(99, 0, steps, 1, dt);
    const Trajectory traj = integrate_with_increments(sys, Vector::Ones(1), dt, fine);
    const double beta_T = fine.col(0).sum();
    const double gap =
        std::abs(std::log(traj.states(0, traj.times.size() - 1).real()) - beta_T);
    if (level > 0) CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 5e-3);
}

TEST_CASE("Ito correction and its inverse") {
  SUBCASE("rotation noise gives drift - sigma^2/2 I") {
    const double sigma = 3.0;
    Matrix d(2, 2);
    d << Complex(0.5, 0), Complex(0, 0), Complex(0, 0), Complex(-1.5, 0);
    const SdeSystem strat = make_system(d, {rotation2(sigma)});
    const SdeSystem ito = ito_correction(strat);
    const Matrix expect = d - 0.5 * sigma * sigma * Matrix::Identity(2, 2);
    CHECK((ito.drift.dense_form() - expect).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(ito.interpretation == Interpretation::Ito);
    CHECK_THROWS_AS(ito_correction(ito), ConfigError);
  }
  SUBCASE("no channels leaves the drift untouched") {
    const SdeSystem strat = make_system(scalar(2.0), {});
    CHECK((ito_correction(strat).drift.dense_form() - scalar(2.0)).cwiseAbs().maxCoeff() ==
          0.0);
  }
  SUBCASE("correction followed by its inverse is the identity") {
    Matrix d(5, 5), b1(5, 5), b2(5, 5);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 5; ++j) {
        d(i, j) = Complex(std::sin(0.9 * i + 0.4 * j), 0.1 * std::cos(1.0 + i - j));
        b1(i, j) = Complex(std::cos(0.3 * i * j), 0);
        b2(i, j) = Complex(0.2 * std::sin(i + 2.0 * j), 0);
      }
    const SdeSystem strat = make_system(d, {b1, b2});
    const SdeSystem back = stratonovich_correction(ito_correction(strat));
    CHECK((back.drift.dense_form() - d).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("skew Stratonovich noise conserves the norm to O(dt^2) per step") {
  const double sigma = 0.5;
  const SdeSystem sys = make_system(Matrix::Zero(2, 2), {rotation2(sigma)});
  Vector x0(2);
  x0 << Complex(1, 0), Complex(0, 0);

  double drift_dt = 0.0, drift_half = 0.0;
  for (std::uint32_t p = 0; p < 4; ++p) {
    const Trajectory a = integrate(sys, x0, 1e-3, 10.0, 11, p);
    const Trajectory b = integrate(sys, x0, 5e-4, 10.0, 11, p);
    drift_dt += std::abs(std::log(a.norm_x(a.times.size() - 1)));
    drift_half += std::abs(std::log(b.norm_x(b.times.size() - 1)));
  }
  drift_dt /= 4;
  drift_half /= 4;
  CHECK(drift_dt < 1e-3);
  CHECK(drift_half < 0.75 * drift_dt);  // first order in dt
}

TEST_CASE("Heun and Ito-corrected Euler-Maruyama converge to each other pathwise") {
  Matrix d(2, 2);
  d << Complex(0.101, 0), Complex(0, 0), Complex(0, 0), Complex(-0.194, 0);
  const SdeSystem strat = make_system(d, {rotation2(2.0)});
  const SdeSystem ito = ito_correction(strat);
  Vector x0(2);
  x0 << Complex(1, 0), Complex(0.7, 0);

  auto mean_gap = [&](double dt) {
    double acc = 0.0;
    const int paths = 32;
    for (int p = 0; p < paths; ++p) {
      const long steps = std::lround(2.0 / dt);
      const RealMatrix dw = rng::brownian_increments(5, p, steps, 1, dt);
      const Trajectory h = integrate_with_increments(strat, x0, dt, dw);
      const Trajectory e = integrate_with_increments(ito, x0, dt, dw);
      acc += (h.states.col(h.times.size() - 1) - e.states.col(e.times.size() - 1)).norm();
    }
    return acc / paths;
  };
  const double g1 = mean_gap(1e-3);
  const double g2 = mean_gap(5e-4);
  CHECK(g2 / g1 < 0.85);
}

TEST_CASE("trajectories are reproducible and path-distinct") {
  const SdeSystem sys = make_system(scalar(-0.3), {scalar(0.8)});
  const Trajectory a = integrate(sys, Vector::Ones(1), 1e-3, 2.0, 42, 3);
  const Trajectory b = integrate(sys, Vector::Ones(1), 1e-3, 2.0, 42, 3);
  CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
  const Trajectory c = integrate(sys, Vector::Ones(1), 1e-3, 2.0, 42, 4);
  CHECK((a.states - c.states).cwiseAbs().maxCoeff() > 0.0);
  const Trajectory d = integrate(sys, Vector::Ones(1), 1e-3, 2.0, 43, 3);
  CHECK((a.states - d.states).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("blow-up reports the offending step") {
  const SdeSystem sys = make_system(scalar(2000.0), {});
  CHECK_THROWS_AS(integrate(sys, Vector::Ones(1), 1e-2, 10.0, 1), NumericalError);
}

TEST_CASE("Lyapunov estimator") {
  SUBCASE("drift only: top eigenvalue of the drift") {
    Matrix d(2, 2);
    d << Complex(0.5, 0), Complex(0, 0), Complex(0, 0), Complex(-1.5, 0);
    const SdeSystem sys = make_system(d, {});
    LyapunovParams p;
    p.paths = 16;
    p.horizon = 50.0;
    p.dt = 1e-3;
    p.seed = 2;
    const LyapunovEstimate est = estimate_lyapunov(sys, p);
    CHECK(est.value == doctest::Approx(0.5).epsilon(0.04));
  }
  SUBCASE("skew noise on a uniformly contracting drift changes nothing") {
    const SdeSystem sys =
        make_system(Complex(-1, 0) * Matrix::Identity(2, 2), {rotation2(5.0)});
    LyapunovParams p;
    p.paths = 8;
    p.horizon = 20.0;
    p.dt = 1e-3;
    p.seed = 3;
    const LyapunovEstimate est = estimate_lyapunov(sys, p);
    CHECK(est.value == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(est.stderror < 1e-9);
  }
  SUBCASE("parameter validation") {
    const SdeSystem sys = make_system(scalar(1.0), {});
    LyapunovParams p;
    p.paths = 4;
    CHECK_THROWS_AS(estimate_lyapunov(sys, p), ConfigError);
  }
}

TEST_CASE("Wong-Zakai approximation") {
  SUBCASE("scalar geometric case matches exp(beta) at nodes") {
    const SdeSystem sys = make_system(Matrix::Zero(1, 1), {scalar(1.0)});
    const double dt = 1e-4;
    const Trajectory traj = wong_zakai_integrate(sys, Vector::Ones(1), dt, 1.0, 21, 0, 4 * dt);
    const RealMatrix fine = rng::brownian_increments(21, 0, 10000, 1, dt);
    const double beta_T = fine.col(0).sum();
    CHECK(std::log(traj.states(0, traj.times.size() - 1).real()) ==
          doctest::Approx(beta_T).epsilon(1e-3));
  }
  SUBCASE("zero noise: identical to the deterministic integrator") {
    const SdeSystem sys = make_system(scalar(-1.0), {});
    const Trajectory wz = wong_zakai_integrate(sys, Vector::Ones(1), 1e-3, 1.0, 5, 0, 4e-3);
    const Trajectory det = integrate(sys, Vector::Ones(1), 1e-3, 1.0, 5);
    CHECK((wz.states - det.states).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("smoothing_dt = dt reproduces the stochastic Heun path exactly") {
    const SdeSystem sys = make_system(scalar(-0.2), {scalar(0.9)});
    const Trajectory wz = wong_zakai_integrate(sys, Vector::Ones(1), 1e-3, 1.0, 6, 2, 1e-3);
    const Trajectory heun = integrate(sys, Vector::Ones(1), 1e-3, 1.0, 6, 2);
    CHECK((wz.states - heun.states).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("invalid smoothing grids are rejected") {
    const SdeSystem sys = make_system(scalar(0.0), {scalar(1.0)});
    CHECK_THROWS_AS(wong_zakai_integrate(sys, Vector::Ones(1), 1e-3, 1.0, 1, 0, 5e-4),
                    ConfigError);
    CHECK_THROWS_AS(wong_zakai_integrate(sys, Vector::Ones(1), 1e-3, 1.0, 1, 0, 2.5e-3),
                    ConfigError);
  }
}

TEST_CASE("default step size respects drift and noise scales") {
  const SdeSystem a = make_system(scalar(-2000.0), {});
  CHECK(default_dt(a) == doctest::Approx(0.1 / 2000.0));
  const SdeSystem b = make_system(Matrix::Zero(2, 2), {rotation2(20.0)});
  CHECK(default_dt(b) == doctest::Approx(0.1 / 400.0));
  const SdeSystem c = make_system(scalar(-0.1), {});
  CHECK(default_dt(c) == doctest::Approx(1e-3));
}
