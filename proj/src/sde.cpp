#include "stratostab/sde.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace stratostab {

namespace {

long step_count(double dt, double horizon) {
  if (dt <= 0.0) throw ConfigError("integrate: dt must be > 0");
  if (horizon < dt) throw ConfigError("integrate: horizon must be at least dt");
  const long steps = std::lround(horizon / dt);
  return std::max<long>(steps, 1);
}

long auto_stride(long steps, long requested) {
  if (requested > 0) return requested;
  return std::max<long>(1, steps / 4000);
}

double state_norm(const Vector& x, const RealVector& w) {
  return w.size() == 0 ? x.norm() : weighted_norm(w, x);
}

[[noreturn]] void throw_blow_up(long step) {
  std::ostringstream msg;
  msg << "integrate: non-finite state encountered at step " << step;
  throw NumericalError(msg.str());
}

// Shared stepping core; `dw` returns the Brownian increment for (step, channel).
template <typename Increment>
Trajectory run_scheme(const SdeSystem& system, const Vector& x0, double dt, long steps,
                      long stride, const RealVector& weights, Increment&& dw) {
  const Index n = system.dim;
  const int m = static_cast<int>(system.diffusions.size());
  if (x0.size() != n) throw ConfigError("integrate: state dimension mismatch");
  const bool heun = system.interpretation == Interpretation::Stratonovich;

  const long records = 2 + (steps - 1) / stride;
  Trajectory traj;
  traj.dt = dt;
  traj.times.resize(records);
  traj.states.resize(n, records);
  traj.norm_x.resize(records);

  Vector x = x0;
  Vector drift_x(n), drift_pred(n), pred(n), acc(n);
  std::vector<Vector> bx(m, Vector(n));
  LinearOp::Workspace ws;

  long rec = 0;
  auto record = [&](long step) {
    traj.times(rec) = static_cast<double>(step) * dt;
    traj.states.col(rec) = x;
    traj.norm_x(rec) = state_norm(x, weights);
    ++rec;
  };
  record(0);

  for (long s = 0; s < steps; ++s) {
    system.drift.apply(x, drift_x, ws);
    for (int k = 0; k < m; ++k) system.diffusions[k].apply(x, bx[k], ws);

    if (heun) {
      pred = x + dt * drift_x;
      for (int k = 0; k < m; ++k) pred.noalias() += dw(s, k) * bx[k];
      system.drift.apply(pred, drift_pred, ws);
      acc = x + (0.5 * dt) * (drift_x + drift_pred);
      for (int k = 0; k < m; ++k) {
        system.diffusions[k].apply(pred, drift_pred, ws);  // reuse buffer
        acc.noalias() += (0.5 * dw(s, k)) * (bx[k] + drift_pred);
      }
      x.swap(acc);
    } else {
      acc = x + dt * drift_x;
      for (int k = 0; k < m; ++k) acc.noalias() += dw(s, k) * bx[k];
      x.swap(acc);
    }

    if (!std::isfinite(x.squaredNorm())) throw_blow_up(s);
    if ((s + 1) % stride == 0 && s + 1 < steps) record(s + 1);
  }
  record(steps);
  traj.times.conservativeResize(rec);
  traj.states.conservativeResize(n, rec);
  traj.norm_x.conservativeResize(rec);
  return traj;
}

}  // namespace

bool SdeSystem::is_real() const {
  if (!drift.is_real()) return false;
  for (const auto& b : diffusions)
    if (!b.is_real()) return false;
  return true;
}

SdeSystem make_system(const Matrix& drift, const std::vector<Matrix>& diffusions,
                      Interpretation interp) {
  SdeSystem sys;
  sys.dim = drift.rows();
  if (drift.rows() != drift.cols()) throw ConfigError("make_system: drift must be square");
  sys.drift = LinearOp::dense(drift);
  for (const auto& b : diffusions) {
    if (b.rows() != sys.dim || b.cols() != sys.dim)
      throw ConfigError("make_system: diffusion dimension mismatch");
    sys.diffusions.push_back(LinearOp::dense(b));
  }
  sys.interpretation = interp;
  return sys;
}

SdeSystem ito_correction(const SdeSystem& system) {
  if (system.interpretation != Interpretation::Stratonovich)
    throw ConfigError("ito_correction: system is already in Ito form");
  Matrix d = system.drift.dense_form();
  for (const auto& b : system.diffusions) {
    const Matrix bd = b.dense_form();
    d += 0.5 * (bd * bd);
  }
  SdeSystem out = system;
  out.drift = LinearOp::dense(std::move(d));
  out.interpretation = Interpretation::Ito;
  return out;
}

SdeSystem stratonovich_correction(const SdeSystem& system) {
  if (system.interpretation != Interpretation::Ito)
    throw ConfigError("stratonovich_correction: system is already in Stratonovich form");
  Matrix d = system.drift.dense_form();
  for (const auto& b : system.diffusions) {
    const Matrix bd = b.dense_form();
    d -= 0.5 * (bd * bd);
  }
  SdeSystem out = system;
  out.drift = LinearOp::dense(std::move(d));
  out.interpretation = Interpretation::Stratonovich;
  return out;
}

double default_dt(const SdeSystem& system) {
  double dt = 1e-3;
  const double dn = system.drift.norm_bound();
  if (dn > 0.0) dt = std::min(dt, 0.1 / dn);
  for (const auto& b : system.diffusions) {
    const double s = b.norm_bound();
    if (s > 0.0) dt = std::min(dt, 0.1 / (s * s));
  }
  return dt;
}

Trajectory integrate(const SdeSystem& system, const Vector& x0, const IntegrationParams& params) {
  const long steps = step_count(params.dt, params.horizon);
  const long stride = auto_stride(steps, params.record_stride);
  Trajectory traj = run_scheme(
      system, x0, params.dt, steps, stride, params.weights, [&](long s, int k) {
        return std::sqrt(params.dt) * rng::normal(params.seed, params.path,
                                                  static_cast<std::uint64_t>(s),
                                                  static_cast<std::uint32_t>(k));
      });
  traj.seed = params.seed;
  traj.path = params.path;
  return traj;
}

Trajectory integrate(const SdeSystem& system, const Vector& x0, double dt, double horizon,
                     std::uint64_t seed, std::uint32_t path) {
  IntegrationParams p;
  p.dt = dt;
  p.horizon = horizon;
  p.seed = seed;
  p.path = path;
  return integrate(system, x0, p);
}

Trajectory integrate_with_increments(const SdeSystem& system, const Vector& x0, double dt,
                                     const RealMatrix& increments, const RealVector& weights) {
  const long steps = increments.rows();
  if (steps < 1) throw ConfigError("integrate_with_increments: empty increment table");
  if (increments.cols() != static_cast<Index>(system.diffusions.size()))
    throw ConfigError("integrate_with_increments: channel count mismatch");
  const long stride = auto_stride(steps, 0);
  return run_scheme(system, x0, dt, steps, stride, weights,
                    [&](long s, int k) { return increments(s, k); });
}

namespace {

// Exact one-channel noise flow exp(B dw) via diagonalization, precomputed once.
struct NoiseFlow {
  Vector eigenvalues;
  Matrix v;
  Matrix v_inv;
};

NoiseFlow make_noise_flow(const Matrix& b) {
  NoiseFlow flow;
  const Matrix skew_part = b + b.adjoint();
  const double scale = b.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    flow.eigenvalues = Vector::Zero(b.rows());
    flow.v = Matrix::Identity(b.rows(), b.cols());
    flow.v_inv = flow.v;
    return flow;
  }
  if (skew_part.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    // Skew-Hermitian: unitary diagonalization of -iB keeps the flow isometric.
    Eigen::SelfAdjointEigenSolver<Matrix> es(Complex(0, -1) * b);
    if (es.info() != Eigen::Success)
      throw NumericalError("estimate_lyapunov: diffusion eigensolve failed");
    flow.eigenvalues = Complex(0, 1) * es.eigenvalues().cast<Complex>();
    flow.v = es.eigenvectors();
    flow.v_inv = flow.v.adjoint();
    return flow;
  }
  Eigen::ComplexEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success)
    throw NumericalError("estimate_lyapunov: diffusion eigensolve failed");
  flow.eigenvalues = es.eigenvalues();
  flow.v = es.eigenvectors();
  Eigen::FullPivLU<Matrix> lu(flow.v);
  if (!lu.isInvertible())
    throw NumericalError("estimate_lyapunov: diffusion matrix is not diagonalizable");
  flow.v_inv = lu.inverse();
  return flow;
}

}  // namespace

LyapunovEstimate estimate_lyapunov(const SdeSystem& system, const LyapunovParams& params) {
  if (params.paths < 8) throw ConfigError("estimate_lyapunov: need at least 8 paths");
  if (params.renorm_interval < 1)
    throw ConfigError("estimate_lyapunov: renorm_interval must be >= 1");
  const SdeSystem strat = system.interpretation == Interpretation::Ito
                              ? stratonovich_correction(system)
                              : system;
  const double dt = params.dt > 0.0 ? params.dt : default_dt(strat);
  const long steps = step_count(dt, params.horizon);
  const Index n = strat.dim;
  const int m = static_cast<int>(strat.diffusions.size());
  const bool real_valued = strat.is_real();

  const Matrix half_flow = (strat.drift.dense_form() * (dt / 2.0)).exp();
  std::vector<NoiseFlow> flows;
  flows.reserve(m);
  for (const auto& b : strat.diffusions) flows.push_back(make_noise_flow(b.dense_form()));

  std::vector<double> exponents(params.paths, 0.0);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    Vector x(n), z(n);
    try {
      for (;;) {
        const int p = next.fetch_add(1);
        if (p >= params.paths) break;
        x = rng::unit_vector(params.seed, static_cast<std::uint32_t>(p), n, real_valued);
        double log_acc = 0.0;
        for (long s = 0; s < steps; ++s) {
          z.noalias() = half_flow * x;
          x.swap(z);
          for (int k = 0; k < m; ++k) {
            const double dw = std::sqrt(dt) * rng::normal(params.seed,
                                                          static_cast<std::uint32_t>(p),
                                                          static_cast<std::uint64_t>(s),
                                                          static_cast<std::uint32_t>(k));
            z.noalias() = flows[k].v_inv * x;
            for (Index i = 0; i < n; ++i) z(i) *= std::exp(flows[k].eigenvalues(i) * dw);
            x.noalias() = flows[k].v * z;
          }
          z.noalias() = half_flow * x;
          x.swap(z);
          if ((s + 1) % params.renorm_interval == 0 || s + 1 == steps) {
            const double nr = x.norm();
            if (!std::isfinite(nr) || nr == 0.0)
              throw NumericalError(
                  "estimate_lyapunov: blow-up before renormalization; "
                  "increase the renormalization frequency");
            log_acc += std::log(nr);
            x /= nr;
          }
        }
        exponents[p] = log_acc / (static_cast<double>(steps) * dt);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  int threads = params.threads > 0 ? params.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, params.paths));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  double mean = 0.0;
  for (double v : exponents) mean += v;
  mean /= params.paths;
  double var = 0.0;
  for (double v : exponents) var += (v - mean) * (v - mean);
  var /= std::max(1, params.paths - 1);

  LyapunovEstimate est;
  est.value = mean;
  est.stderror = std::sqrt(var / params.paths);
  est.paths = params.paths;
  est.horizon = static_cast<double>(steps) * dt;
  est.renorm_interval = params.renorm_interval;
  return est;
}

Trajectory wong_zakai_integrate(const SdeSystem& system, const Vector& x0, double dt,
                                double horizon, std::uint64_t seed, std::uint32_t path,
                                double smoothing_dt, const RealVector& weights) {
  if (system.interpretation != Interpretation::Stratonovich)
    throw ConfigError("wong_zakai_integrate: system must be Stratonovich");
  if (smoothing_dt < dt) throw ConfigError("wong_zakai_integrate: smoothing_dt must be >= dt");
  const double ratio = smoothing_dt / dt;
  const long factor = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(factor)) > 1e-9)
    throw ConfigError("wong_zakai_integrate: smoothing_dt must be an integer multiple of dt");
  const long steps = step_count(dt, horizon);
  if (steps % factor != 0)
    throw ConfigError("wong_zakai_integrate: step count not divisible by smoothing factor");

  const int m = static_cast<int>(system.diffusions.size());
  RealMatrix effective(steps, m);
  if (m > 0) {
    const RealMatrix fine = rng::brownian_increments(seed, path, steps, m, dt);
    // Piecewise-linear beta has constant slope on each smoothing block; the
    // deterministic Heun step then coincides with the stochastic Heun step fed
    // with the block-averaged increments.
    for (long block = 0; block < steps / factor; ++block) {
      RealVector avg = fine.middleRows(block * factor, factor).colwise().sum() /
                       static_cast<double>(factor);
      for (long s = 0; s < factor; ++s) effective.row(block * factor + s) = avg;
    }
  }
  Trajectory traj = integrate_with_increments(system, x0, dt, effective, weights);
  traj.seed = seed;
  traj.path = path;
  return traj;
}

}  // namespace stratostab
