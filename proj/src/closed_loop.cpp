#include "stratostab/closed_loop.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SparseCore>

namespace stratostab {

namespace {

void check_consistency(const OperatorModel& model, const UnstableDecomposition& dec,
                       const FeedbackLaw& law) {
  if (law.sensors.rows() != model.dim || law.n_modes() != dec.N)
    throw ConfigError("simulate_closed_loop: model, decomposition and law do not match");
  if (dec.N == 0)
    throw ConfigError("simulate_closed_loop: system is already stable (N = 0)");
}

double modal_sigma(const FeedbackLaw& law) {
  double s = 0.0;
  for (const auto& c : law.noise.matrices)
    s = std::max(s, c.cwiseAbs().rowwise().sum().maxCoeff());
  return s;
}

double closed_loop_dt(const OperatorModel& model, const FeedbackLaw& law, double requested) {
  if (requested > 0.0) return requested;
  double dt = 1e-3;
  const double an = model.generator.cwiseAbs().rowwise().sum().maxCoeff();
  if (an > 0.0) dt = std::min(dt, 0.1 / an);
  // The realized maps act through the rank-N modal channel, so the modal
  // intensity is the relevant noise scale; |B_k| itself is inflated by the
  // actuator norms without affecting stability.
  const double sig = modal_sigma(law);
  if (sig > 0.0) dt = std::min(dt, 0.1 / (sig * sig));
  return dt;
}

void attach_split_norms(Trajectory& traj, const FeedbackLaw& law) {
  const Index records = traj.times.size();
  traj.norm_xu.resize(records);
  traj.norm_xs.resize(records);
  const Matrix wsens = law.weights.cast<Complex>().asDiagonal() * law.sensors;
  for (Index r = 0; r < records; ++r) {
    const Vector y = wsens.adjoint() * traj.states.col(r);
    const Vector xu = law.basis * y;
    traj.norm_xu(r) = weighted_norm(law.weights, xu);
    traj.norm_xs(r) = weighted_norm(law.weights, Vector(traj.states.col(r) - xu));
  }
}

bool law_is_real(const FeedbackLaw& law, const OperatorModel& model, const Vector& x0) {
  if (!model.is_real()) return false;
  if (!is_real_matrix(law.sensors) || !is_real_matrix(law.basis) ||
      !is_real_matrix(law.actuators_masked) || !is_real_matrix(law.modal_drift))
    return false;
  for (const auto& c : law.noise.matrices)
    if (!is_real_matrix(c)) return false;
  return x0.imag().cwiseAbs().maxCoeff() == 0.0;
}

// Closed-loop stepping kernel. The realized maps share one low-rank frame
// B_k = L C^k R^H, so a Heun stage needs R^H x and a single L-multiply with
// the increment-weighted core; the drift is applied through a row-major
// sparse matrix when the generator is banded. Instantiated for real scalars
// when the whole loop is real, which roughly quarters the flop count.
template <typename Scalar>
struct FusedKernel {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  bool use_sparse = false;
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> sparse_drift;  // -generator
  Mat dense_drift;
  Mat left, right_adj;  // right_adj = (W sensors)^H, N x n
  std::vector<Mat> cores;
  Mat modal_drift;  // -A_u representation, N x N

  static Mat convert(const Matrix& a) {
    if constexpr (std::is_same_v<Scalar, Complex>)
      return a;
    else
      return a.real();
  }

  FusedKernel(const OperatorModel& model, const FeedbackLaw& law) {
    const Index n = model.dim;
    Index nnz = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (model.generator(i, j) != Complex(0, 0)) ++nnz;
    use_sparse = nnz <= n * n / 4;
    const Mat neg = convert(-model.generator);
    if (use_sparse) {
      std::vector<Eigen::Triplet<Scalar>> trips;
      trips.reserve(nnz);
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
          if (neg(i, j) != Scalar(0)) trips.emplace_back(i, j, neg(i, j));
      sparse_drift.resize(n, n);
      sparse_drift.setFromTriplets(trips.begin(), trips.end());
      sparse_drift.makeCompressed();
    } else {
      dense_drift = neg;
    }
    left = convert(law.actuators_masked);
    right_adj = convert(Matrix(law.weights.cast<Complex>().asDiagonal() * law.sensors))
                    .adjoint();
    for (const auto& c : law.noise.matrices) cores.push_back(convert(c));
    modal_drift = convert(-law.modal_drift);
  }

  void drift(const Vec& x, Vec& out) const {
    if (use_sparse)
      out.noalias() = sparse_drift * x;
    else
      out.noalias() = dense_drift * x;
  }
};

template <typename Scalar, typename Increment>
ClosedLoopRun fused_run(const FusedKernel<Scalar>& kernel, const OperatorModel& model,
                        const FeedbackLaw& law, const Vector& x0_c, double dt, long steps,
                        long stride, Increment&& dw, bool with_modal) {
  using Vec = typename FusedKernel<Scalar>::Vec;
  using Mat = typename FusedKernel<Scalar>::Mat;
  const Index n = model.dim;
  const Index nm = law.n_modes();
  const int m = static_cast<int>(kernel.cores.size());

  const long records = 2 + (steps - 1) / stride;
  ClosedLoopRun run;
  run.full.dt = dt;
  run.full.times.resize(records);
  run.full.states.resize(n, records);
  run.full.norm_x.resize(records);
  if (with_modal) {
    run.modal.dt = dt;
    run.modal.times.resize(records);
    run.modal.states.resize(nm, records);
    run.modal.norm_x.resize(records);
  }

  Vec x = FusedKernel<Scalar>::convert(x0_c);
  Vec y = kernel.right_adj * x;
  Vec dx(n), dpred(n), pred(n);
  Vec sens(nm), sens_pred(nm), csens(nm);
  Vec ydrift(nm), ypred(nm), ypred_drift(nm), ysum(nm);
  Mat core(nm, nm);

  long rec = 0;
  auto record = [&](long step) {
    run.full.times(rec) = static_cast<double>(step) * dt;
    run.full.states.col(rec) = x.template cast<Complex>();
    run.full.norm_x(rec) = weighted_norm(model.weights, Vector(run.full.states.col(rec)));
    if (with_modal) {
      run.modal.times(rec) = run.full.times(rec);
      run.modal.states.col(rec) = y.template cast<Complex>();
      run.modal.norm_x(rec) = y.norm();
    }
    ++rec;
  };
  record(0);

  for (long s = 0; s < steps; ++s) {
    core.setZero();
    for (int k = 0; k < m; ++k) core += Scalar(dw(s, k)) * kernel.cores[k];

    kernel.drift(x, dx);
    sens.noalias() = kernel.right_adj * x;
    csens.noalias() = core * sens;
    pred = x + Scalar(dt) * dx;
    pred.noalias() += kernel.left * csens;
    kernel.drift(pred, dpred);
    sens_pred.noalias() = kernel.right_adj * pred;
    sens_pred += sens;
    csens.noalias() = core * sens_pred;
    x += Scalar(0.5 * dt) * (dx + dpred);
    x.noalias() += kernel.left * (Scalar(0.5) * csens);

    if (with_modal) {
      ydrift.noalias() = kernel.modal_drift * y;
      ypred = y + Scalar(dt) * ydrift;
      ypred.noalias() += core * y;
      ypred_drift.noalias() = kernel.modal_drift * ypred;
      ysum = y + ypred;
      y += Scalar(0.5 * dt) * (ydrift + ypred_drift);
      y.noalias() += core * (Scalar(0.5) * ysum);
    }

    if (!std::isfinite(x.squaredNorm())) {
      std::ostringstream msg;
      msg << "simulate_closed_loop: non-finite state encountered at step " << s;
      throw NumericalError(msg.str());
    }
    if ((s + 1) % stride == 0 && s + 1 < steps) record(s + 1);
  }
  record(steps);
  run.full.times.conservativeResize(rec);
  run.full.states.conservativeResize(n, rec);
  run.full.norm_x.conservativeResize(rec);
  if (with_modal) {
    run.modal.times.conservativeResize(rec);
    run.modal.states.conservativeResize(nm, rec);
    run.modal.norm_x.conservativeResize(rec);
  }
  attach_split_norms(run.full, law);
  return run;
}

template <typename Increment>
ClosedLoopRun dispatch_run(const OperatorModel& model, const FeedbackLaw& law, const Vector& x0,
                           double dt, long steps, long stride, Increment&& dw,
                           bool with_modal) {
  if (law_is_real(law, model, x0)) {
    const FusedKernel<double> kernel(model, law);
    return fused_run(kernel, model, law, x0, dt, steps, stride, dw, with_modal);
  }
  const FusedKernel<Complex> kernel(model, law);
  return fused_run(kernel, model, law, x0, dt, steps, stride, dw, with_modal);
}

long checked_steps(double dt, double horizon) {
  if (dt <= 0.0) throw ConfigError("simulate_closed_loop: dt must be > 0");
  if (horizon < dt) throw ConfigError("simulate_closed_loop: horizon must be at least dt");
  return std::max<long>(std::lround(horizon / dt), 1);
}

long pick_stride(long steps, long requested) {
  if (requested > 0) return requested;
  return std::max<long>(1, steps / 4000);
}

}  // namespace

SdeSystem closed_loop_system(const OperatorModel& model, const FeedbackLaw& law) {
  SdeSystem sys;
  sys.dim = model.dim;
  Index nnz = 0;
  for (Index j = 0; j < model.dim; ++j)
    for (Index i = 0; i < model.dim; ++i)
      if (model.generator(i, j) != Complex(0, 0)) ++nnz;
  sys.drift = (nnz <= model.dim * model.dim / 4) ? LinearOp::sparse(-model.generator)
                                                 : LinearOp::dense(-model.generator);
  sys.diffusions = law.realized_maps();
  sys.interpretation = Interpretation::Stratonovich;
  return sys;
}

ClosedLoopRun simulate_closed_loop(const OperatorModel& model, const UnstableDecomposition& dec,
                                   const FeedbackLaw& law, const Vector& x0,
                                   const ClosedLoopParams& params) {
  check_consistency(model, dec, law);
  const double dt = closed_loop_dt(model, law, params.dt);
  const long steps = checked_steps(dt, params.horizon);
  const long stride = pick_stride(steps, params.record_stride);
  const double sq = std::sqrt(dt);
  ClosedLoopRun run = dispatch_run(
      model, law, x0, dt, steps, stride,
      [&](long s, int k) {
        return sq * rng::normal(params.seed, params.path, static_cast<std::uint64_t>(s),
                                static_cast<std::uint32_t>(k));
      },
      /*with_modal=*/true);
  run.full.seed = run.modal.seed = params.seed;
  run.full.path = run.modal.path = params.path;
  return run;
}

Trajectory simulate_wong_zakai(const OperatorModel& model, const UnstableDecomposition& dec,
                               const FeedbackLaw& law, const Vector& x0,
                               const ClosedLoopParams& params, double smoothing_dt) {
  check_consistency(model, dec, law);
  const double dt = closed_loop_dt(model, law, params.dt);
  if (smoothing_dt < dt)
    throw ConfigError("simulate_wong_zakai: smoothing_dt must be >= dt");
  const double ratio = smoothing_dt / dt;
  const long factor = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(factor)) > 1e-9)
    throw ConfigError("simulate_wong_zakai: smoothing_dt must be an integer multiple of dt");
  const long steps = checked_steps(dt, params.horizon);
  if (steps % factor != 0)
    throw ConfigError("simulate_wong_zakai: step count not divisible by smoothing factor");
  const long stride = pick_stride(steps, params.record_stride);

  const int m = static_cast<int>(law.noise.matrices.size());
  RealMatrix effective(steps, std::max(m, 1));
  const RealMatrix fine = rng::brownian_increments(params.seed, params.path, steps, m, dt);
  for (long block = 0; block < steps / factor; ++block) {
    RealVector avg =
        fine.middleRows(block * factor, factor).colwise().sum() / static_cast<double>(factor);
    for (long s = 0; s < factor; ++s) effective.row(block * factor + s).head(m) = avg;
  }
  ClosedLoopRun run = dispatch_run(
      model, law, x0, dt, steps, stride,
      [&](long s, int k) { return effective(s, k); }, /*with_modal=*/false);
  run.full.seed = params.seed;
  run.full.path = params.path;
  return run.full;
}

Matrix extract_modal(const FeedbackLaw& law, const Trajectory& traj) {
  const Matrix wsens = law.weights.cast<Complex>().asDiagonal() * law.sensors;
  return wsens.adjoint() * traj.states;
}

}  // namespace stratostab
