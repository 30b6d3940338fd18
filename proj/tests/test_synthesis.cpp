#include <doctest.h>

#include <cmath>

#include "stratostab/closed_loop.hpp"
#include "stratostab/model.hpp"
#include "stratostab/spectral.hpp"
#include "stratostab/synthesis.hpp"

using namespace stratostab;

namespace {

Vector complex_list(std::initializer_list<Complex> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (const Complex& c : values) v(i++) = c;
  return v;
}

double max_skew_violation(const NoiseDesign& design) {
  double worst = 0.0;
  for (const auto& c : design.matrices)
    worst = std::max(worst, (c + c.adjoint()).cwiseAbs().maxCoeff());
  return worst;
}

struct AdvDiffFixture {
  OperatorModel model;
  SpectralData bio;
  UnstableDecomposition dec;

  explicit AdvDiffFixture(Index n = 96, double c = -0.5, double mask_lo = 0.3,
                          double mask_hi = 0.5) {
    model = subdomain_mask(build_advection_diffusion({n, 0.01, 0.0, c}), mask_lo, mask_hi);
    const SpectralData sd = eigendecompose(model);
    dec = select_unstable_index(sd);
    bio = biorthonormalize(sd, dec.N);
  }
};

}  // namespace

TEST_CASE("rotation generators have the documented shape") {
  SUBCASE("N = 2, sigma = 3") {
    const NoiseDesign d = synthesize_noise_matrices(complex_list({{-0.5, 0}, {1.5, 0}}), 3.0);
    CHECK(d.channels == 1);
    REQUIRE(d.matrices.size() == 1);
    CHECK(d.matrices[0](0, 1) == Complex(-3, 0));
    CHECK(d.matrices[0](1, 0) == Complex(3, 0));
    CHECK(d.matrices[0](0, 0) == Complex(0, 0));
    CHECK(max_skew_violation(d) == 0.0);
  }
  SUBCASE("N = 4: three matrices with exactly two nonzero entries each") {
    const NoiseDesign d = synthesize_noise_matrices(
        complex_list({{-0.4, 0}, {-0.1, 0}, {0.4, 0}, {1.1, 0}}), 2.0);
    CHECK(d.channels == 3);
    for (const auto& c : d.matrices) {
      Index nonzero = 0;
      for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j)
          if (c(i, j) != Complex(0, 0)) ++nonzero;
      CHECK(nonzero == 2);
    }
    CHECK(max_skew_violation(d) == 0.0);
  }
  SUBCASE("invalid blocks are rejected") {
    CHECK_THROWS_AS(synthesize_noise_matrices(complex_list({{-1.0, 0}}), 1.0), ConfigError);
    CHECK_THROWS_AS(synthesize_noise_matrices(complex_list({{-2.0, 0}, {1.0, 0}}), 1.0),
                    ConfigError);
    CHECK_THROWS_AS(synthesize_noise_matrices(complex_list({{1.0, 0}}), -1.0), ConfigError);
    // a single already-stable mode is fine and needs no channels
    const NoiseDesign d = synthesize_noise_matrices(complex_list({{0.7, 0}}), 0.0);
    CHECK(d.channels == 0);
  }
}

TEST_CASE("intensity tuning") {
  TuneParams tune;
  tune.estimator.paths = 16;
  tune.estimator.horizon = 30.0;
  tune.estimator.seed = 17;

  SUBCASE("certifies a reachable target") {
    Matrix a_u(2, 2);
    a_u << Complex(-0.5, 0), Complex(0, 0), Complex(0, 0), Complex(1.5, 0);
    const NoiseDesign d = tune_noise_intensity(a_u, -0.3, tune);
    CHECK(d.certified);
    REQUIRE(d.achieved_rate.has_value());
    CHECK(*d.achieved_rate <= -0.3);
    CHECK(d.sigma > 0.0);
  }
  SUBCASE("rejects targets beyond the trace average") {
    Matrix a_u(2, 2);
    a_u << Complex(-0.5, 0), Complex(0, 0), Complex(0, 0), Complex(1.5, 0);
    CHECK_THROWS_AS(tune_noise_intensity(a_u, -10.0, tune), ConfigError);
    CHECK_THROWS_AS(tune_noise_intensity(a_u, 0.1, tune), ConfigError);
  }
  SUBCASE("stable drift with sigma = 0 already decays at the top eigenvalue") {
    const NoiseDesign d = synthesize_noise_matrices(complex_list({{1.0, 0}, {2.0, 0}}), 0.0);
    Matrix a_u(2, 2);
    a_u << Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(2, 0);
    SdeSystem sys = make_system(-a_u, {d.matrices[0]});
    LyapunovParams p;
    p.paths = 8;
    p.horizon = 30.0;
    p.dt = 1e-3;
    p.seed = 4;
    CHECK(estimate_lyapunov(sys, p).value == doctest::Approx(-1.0).epsilon(0.1));
  }
}

TEST_CASE("actuator construction") {
  SUBCASE("full-domain mask on a self-adjoint model: gram = I, actuators = duals") {
    const OperatorModel model = build_advection_diffusion({64, 0.05, 0.0, 0.0});
    const SpectralData bio = biorthonormalize(eigendecompose(model), 4);
    const ActuatorSet act = build_actuators(bio, 4, model);
    CHECK((act.gram - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((act.actuators - bio.left_vectors.leftCols(4)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(act.condition_number < 1.0 + 1e-8);
  }
  SUBCASE("masked pairing identity holds on the unstable block") {
    AdvDiffFixture fx;
    REQUIRE(fx.dec.N == 4);
    const ActuatorSet act = build_actuators(fx.bio, fx.dec.N, fx.model);
    CHECK(act.pairing_residual <= 1e-8);
    CHECK((act.gram - act.gram.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("single-point mask makes the gram singular") {
    OperatorModel model = build_advection_diffusion({96, 0.01, 0.0, -0.5});
    const double h = 1.0 / 97.0;
    model = subdomain_mask(model, 40.5 * h, 41.5 * h);
    REQUIRE(model.mask.sum() == 1.0);
    const SpectralData bio = biorthonormalize(eigendecompose(model), 4);
    CHECK_THROWS_AS(build_actuators(bio, 4, model), NumericalError);
  }
}

TEST_CASE("complex feedback law") {
  AdvDiffFixture fx;
  const ActuatorSet act = build_actuators(fx.bio, fx.dec.N, fx.model);
  const NoiseDesign noise =
      synthesize_noise_matrices(fx.bio.eigenvalues.head(fx.dec.N), 2.5);
  const FeedbackLaw law = build_feedback(noise, fx.bio, act, fx.model);
  const auto maps = law.realized_maps();
  REQUIRE(maps.size() == 3);

  SUBCASE("modal closure: sensing mask R_k(phi_m) recovers column m of C^k") {
    for (std::size_t k = 0; k < maps.size(); ++k)
      for (Index m = 0; m < fx.dec.N; ++m) {
        const Vector image = maps[k].apply(Vector(fx.dec.phi.col(m)));
        for (Index l = 0; l < fx.dec.N; ++l) {
          const Complex coord =
              weighted_inner(fx.model.weights, image, Vector(fx.bio.left_vectors.col(l)));
          CHECK(std::abs(coord - noise.matrices[k](l, m)) < 1e-8);
        }
      }
  }
  SUBCASE("states with vanishing unstable projection produce zero feedback") {
    Vector x(fx.model.dim);
    for (Index i = 0; i < fx.model.dim; ++i) x(i) = Complex(std::cos(0.17 * i), 0);
    const auto [y, xs] = project(fx.dec, x);
    (void)y;
    const double scale = maps[0].apply(x).norm();
    CHECK(maps[0].apply(Vector(xs)).norm() < 1e-9 * std::max(1.0, scale));
  }
  SUBCASE("realized maps have rank at most N") {
    const Matrix b = maps[0].dense_form();
    Eigen::JacobiSVD<Matrix> svd(b);
    const auto& sv = svd.singularValues();
    for (Index i = fx.dec.N; i < sv.size(); ++i) CHECK(sv(i) < 1e-10 * sv(0));
  }
}

TEST_CASE("real basis") {
  SUBCASE("real spectrum: psi coincides with the (already orthonormal) eigenvectors") {
    const OperatorModel model = build_advection_diffusion({64, 0.01, 0.0, -0.5});
    const SpectralData bio = biorthonormalize(eigendecompose(model), 4);
    const RealBasis basis = build_real_basis(bio, 4);
    REQUIRE(basis.psi.cols() == 4);
    for (Index j = 0; j < 4; ++j) {
      const double gap =
          (basis.psi.col(j) - bio.right_vectors.col(j).real()).cwiseAbs().maxCoeff();
      const double gap_flip =
          (basis.psi.col(j) + bio.right_vectors.col(j).real()).cwiseAbs().maxCoeff();
      CHECK(std::min(gap, gap_flip) < 1e-8);
    }
    double worst = 0.0;
    for (Index j = 0; j < 4; ++j)
      worst = std::max(worst, std::abs(basis.a_u_re(j, j) - bio.eigenvalues(j).real()));
    CHECK(worst < 1e-8);
  }
  SUBCASE("conjugate pair spans {Re phi, Im phi} and keeps the trace") {
    Matrix a = Matrix::Zero(4, 4);
    a(0, 0) = Complex(-0.3, 0);
    a(0, 1) = Complex(0.9, 0);
    a(1, 0) = Complex(-0.9, 0);
    a(1, 1) = Complex(-0.3, 0);
    a(2, 2) = Complex(2.0, 0);
    a(3, 3) = Complex(3.0, 0);
    const OperatorModel model =
        build_from_matrix(a, RealVector::Ones(4), RealVector::Ones(4));
    const SpectralData sd = eigendecompose(model);
    const UnstableDecomposition dec = select_unstable_index(sd);
    REQUIRE(dec.N == 3);
    const SpectralData bio = biorthonormalize(sd, 3);
    const RealBasis basis = build_real_basis(bio, 3);
    REQUIRE(basis.psi.cols() == 3);
    // orthonormality in the weighted product (unit weights here)
    const RealMatrix g = basis.psi.transpose() * basis.psi;
    CHECK((g - RealMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    // trace identity
    double sum_re = 0.0;
    for (Index j = 0; j < 3; ++j) sum_re += bio.eigenvalues(j).real();
    CHECK(std::abs(basis.a_u_re.trace() - sum_re) < 1e-8);
  }
  SUBCASE("advection-diffusion trace identity at 1e-8") {
    AdvDiffFixture fx;
    const RealBasis basis = build_real_basis(fx.bio, fx.dec.N);
    CHECK(std::abs(basis.a_u_re.trace() - fx.dec.sum_re) < 1e-8);
  }
}

TEST_CASE("real feedback law") {
  AdvDiffFixture fx;
  const RealBasis basis = build_real_basis(fx.bio, fx.dec.N);

  SUBCASE("fixed sigma: realized maps are real and satisfy the pairing identity") {
    RealFeedbackOptions opt;
    opt.sigma = 2.5;
    const FeedbackLaw law = build_real_feedback(basis, fx.bio, fx.model, opt);
    CHECK(law.kind == ControllerKind::Real);
    CHECK(law.actuator_set.pairing_residual <= 1e-8);
    for (const auto& map : law.realized_maps())
      CHECK(map.dense_form().imag().cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("full-domain mask with orthonormal basis gives gram = I") {
    const OperatorModel model = build_advection_diffusion({64, 0.05, 0.0, 0.0});
    const SpectralData bio = biorthonormalize(eigendecompose(model), 3);
    const RealBasis rb = build_real_basis(bio, 3);
    RealFeedbackOptions opt;
    opt.sigma = 1.0;
    const FeedbackLaw law = build_real_feedback(rb, bio, model, opt);
    CHECK((law.actuator_set.gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
    const Matrix act = law.actuator_set.actuators;
    CHECK((act.real() - rb.psi).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("real and complex constructions coincide on a self-adjoint model") {
    const ActuatorSet act = build_actuators(fx.bio, fx.dec.N, fx.model);
    const NoiseDesign noise =
        synthesize_noise_matrices(fx.bio.eigenvalues.head(fx.dec.N), 3.0);
    const FeedbackLaw complex_law = build_feedback(noise, fx.bio, act, fx.model);
    RealFeedbackOptions opt;
    opt.sigma = 3.0;
    const FeedbackLaw real_law = build_real_feedback(basis, fx.bio, fx.model, opt);
    const auto cm = complex_law.realized_maps();
    const auto rm = real_law.realized_maps();
    REQUIRE(cm.size() == rm.size());
    for (std::size_t k = 0; k < cm.size(); ++k)
      CHECK((cm[k].dense_form() - rm[k].dense_form()).cwiseAbs().maxCoeff() < 1e-8);
  }
}
