#include "stratostab/model.hpp"

#include <sstream>

namespace stratostab {

namespace {

RealVector default_grid(Index n) {
  RealVector g(n);
  const double h = 1.0 / static_cast<double>(n + 1);
  for (Index i = 0; i < n; ++i) g(i) = static_cast<double>(i + 1) * h;
  return g;
}

void validate(const OperatorModel& m) {
  if (m.generator.rows() != m.dim || m.generator.cols() != m.dim)
    throw ConfigError("OperatorModel: generator dimensions do not match dim");
  if (m.weights.size() != m.dim || m.mask.size() != m.dim || m.grid.size() != m.dim)
    throw ConfigError("OperatorModel: vector lengths do not match dim");
  if ((m.weights.array() <= 0.0).any())
    throw ConfigError("OperatorModel: weights must be strictly positive");
  for (Index i = 0; i < m.dim; ++i)
    if (m.mask(i) != 0.0 && m.mask(i) != 1.0)
      throw ConfigError("OperatorModel: mask entries must be exactly 0 or 1");
  if (m.mask.sum() == 0.0)
    throw ConfigError("OperatorModel: mask is identically zero");
}

}  // namespace

OperatorModel build_advection_diffusion(const AdvectionDiffusionSpec& spec) {
  if (spec.n < 8) throw ConfigError("build_advection_diffusion: n must be >= 8");
  if (spec.nu <= 0.0) throw ConfigError("build_advection_diffusion: nu must be > 0");

  const Index n = spec.n;
  const double h = 1.0 / static_cast<double>(n + 1);
  const double diff = spec.nu / (h * h);
  const double adv = spec.f / (2.0 * h);

  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = 2.0 * diff + spec.c;
    if (i > 0) a(i, i - 1) = -diff - adv;
    if (i + 1 < n) a(i, i + 1) = -diff + adv;
  }

  OperatorModel m;
  m.dim = n;
  m.generator = std::move(a);
  m.weights = RealVector::Constant(n, h);
  m.mask = RealVector::Ones(n);
  m.grid = default_grid(n);
  std::ostringstream label;
  label << "advdiff(n=" << n << ",nu=" << spec.nu << ",f=" << spec.f << ",c=" << spec.c << ")";
  m.label = label.str();
  validate(m);
  return m;
}

OperatorModel build_from_matrix(const Matrix& entries, const RealVector& weights,
                                const RealVector& mask, const std::string& label) {
  if (entries.rows() != entries.cols())
    throw ConfigError("build_from_matrix: matrix must be square");
  OperatorModel m;
  m.dim = entries.rows();
  m.generator = entries;
  m.weights = weights;
  m.mask = mask;
  m.grid = default_grid(m.dim);
  m.label = label;
  validate(m);
  return m;
}

OperatorModel subdomain_mask(const OperatorModel& model, double lo, double hi) {
  if (!(0.0 <= lo && lo < hi && hi <= 1.0))
    throw ConfigError("subdomain_mask: require 0 <= lo < hi <= 1");
  OperatorModel out = model;
  for (Index i = 0; i < out.dim; ++i)
    out.mask(i) = (lo < out.grid(i) && out.grid(i) < hi) ? 1.0 : 0.0;
  if (out.mask.sum() == 0.0) {
    std::ostringstream msg;
    msg << "subdomain_mask: interval (" << lo << ", " << hi << ") contains no grid point";
    throw ConfigError(msg.str());
  }
  return out;
}

}  // namespace stratostab
