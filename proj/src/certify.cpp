#include "stratostab/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stratostab {

namespace {

// Least-squares slope of y against t.
double slope(const RealVector& t, const RealVector& y) {
  const double n = static_cast<double>(t.size());
  const double tm = t.mean();
  const double ym = y.mean();
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < t.size(); ++i) {
    num += (t(i) - tm) * (y(i) - ym);
    den += (t(i) - tm) * (t(i) - tm);
  }
  if (den == 0.0) throw NumericalError("rate fit: degenerate time grid");
  (void)n;
  return num / den;
}

std::pair<RealVector, RealVector> tail_window(const RealVector& times, const RealVector& values,
                                              double window) {
  if (!(window > 0.0 && window <= 1.0))
    throw ConfigError("rate fit: window must lie in (0, 1]");
  const double horizon = times(times.size() - 1);
  const double t0 = (1.0 - window) * horizon - 1e-12;
  std::vector<Index> idx;
  for (Index i = 0; i < times.size(); ++i)
    if (times(i) >= t0) idx.push_back(i);
  RealVector t(idx.size()), v(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    t(static_cast<Index>(i)) = times(idx[i]);
    v(static_cast<Index>(i)) = values(idx[i]);
  }
  return {std::move(t), std::move(v)};
}

}  // namespace

double fit_decay_rate(const Trajectory& traj, double window) {
  auto [t, n] = tail_window(traj.times, traj.norm_x, window);
  if (t.size() < 10) throw ConfigError("fit_decay_rate: fewer than 10 samples in the window");
  RealVector logn(n.size());
  for (Index i = 0; i < n.size(); ++i) {
    if (!(n(i) >= 0.0) || !std::isfinite(n(i)))
      throw NumericalError("fit_decay_rate: non-finite norm in the window");
    if (n(i) == 0.0) return std::numeric_limits<double>::infinity();
    logn(i) = std::log(n(i));
  }
  return -slope(t, logn);
}

DecayCertificate certify_decay(const std::vector<Trajectory>& ensemble, double gamma,
                               double window) {
  if (ensemble.empty()) throw ConfigError("certify_decay: empty ensemble");
  if (gamma <= 0.0) throw ConfigError("certify_decay: gamma must be > 0");

  DecayCertificate cert;
  cert.gamma = gamma;
  cert.paths = static_cast<int>(ensemble.size());
  cert.window = window;
  cert.gamma_hat = std::numeric_limits<double>::infinity();
  cert.c_hat = 0.0;
  int satisfied = 0;

  for (const auto& traj : ensemble) {
    if (traj.times.size() < 4)
      throw ConfigError("certify_decay: trajectory has too few samples");
    const double n0 = traj.norm_x(0);
    if (!(n0 > 0.0)) throw ConfigError("certify_decay: zero initial norm");
    const double horizon = traj.times(traj.times.size() - 1);

    double c_path = 0.0;
    double first_half = 0.0, second_half = 0.0;
    for (Index i = 0; i < traj.times.size(); ++i) {
      const double e = traj.norm_x(i) * std::exp(gamma * traj.times(i)) / n0;
      c_path = std::max(c_path, e);
      if (traj.times(i) < 0.5 * horizon)
        first_half = std::max(first_half, e);
      else
        second_half = std::max(second_half, e);
    }
    const bool ok = std::isfinite(c_path) && second_half <= first_half;
    if (ok) ++satisfied;
    cert.c_hat = std::max(cert.c_hat, std::min(c_path, std::numeric_limits<double>::max()));
    cert.gamma_hat = std::min(cert.gamma_hat, fit_decay_rate(traj, window));
  }

  cert.fraction_satisfying = static_cast<double>(satisfied) / cert.paths;
  cert.pass = (satisfied == cert.paths);
  return cert;
}

MeanSquareDecay mean_square_decay(const std::vector<Trajectory>& ensemble, double window) {
  if (ensemble.size() < 8)
    throw ConfigError("mean_square_decay: need at least 8 paths");
  const auto& t0 = ensemble.front().times;
  for (const auto& traj : ensemble) {
    if (traj.norm_xs.size() != t0.size())
      throw ConfigError("mean_square_decay: paths lack stable-part norms on a common grid");
    if ((traj.times - t0).cwiseAbs().maxCoeff() > 1e-12)
      throw ConfigError("mean_square_decay: time grids differ across paths");
  }

  MeanSquareDecay out;
  out.times = t0;
  out.curve = RealVector::Zero(t0.size());
  for (const auto& traj : ensemble) out.curve += traj.norm_xs.cwiseAbs2();
  out.curve /= static_cast<double>(ensemble.size());

  auto [t, v] = tail_window(out.times, out.curve, window);
  if (t.size() < 10) throw ConfigError("mean_square_decay: fewer than 10 samples in the window");
  RealVector logv(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    if (!(v(i) > 0.0))
      throw NumericalError("mean_square_decay: nonpositive ensemble average in the window");
    logv(i) = std::log(v(i));
  }
  out.rate = -slope(t, logv);
  return out;
}

double baseline_growth(const OperatorModel& model, const Vector& x0, double horizon) {
  SdeSystem sys;
  sys.dim = model.dim;
  Index nnz = 0;
  for (Index j = 0; j < model.dim; ++j)
    for (Index i = 0; i < model.dim; ++i)
      if (model.generator(i, j) != Complex(0, 0)) ++nnz;
  sys.drift = (nnz <= model.dim * model.dim / 4) ? LinearOp::sparse(-model.generator)
                                                 : LinearOp::dense(-model.generator);
  sys.interpretation = Interpretation::Stratonovich;

  IntegrationParams p;
  p.dt = std::min(1e-3, 0.1 / std::max(1e-30, sys.drift.norm_bound()));
  p.horizon = horizon;
  p.weights = model.weights;
  const Trajectory traj = integrate(sys, x0, p);
  return -fit_decay_rate(traj, 0.5);
}

}  // namespace stratostab
