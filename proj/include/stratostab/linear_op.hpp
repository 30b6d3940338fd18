#pragma once

#include <vector>

#include <Eigen/SparseCore>

#include "stratostab/types.hpp"

namespace stratostab {

/// A linear map x -> M x stored densely, sparsely, or as a low-rank product
/// left * core * right^H. Shared read-only across threads; apply() takes a
/// per-caller workspace so no internal state is mutated.
class LinearOp {
 public:
  enum class Kind { Dense, Sparse, LowRank };

  struct Workspace {
    Vector small_a;
    Vector small_b;
  };

  LinearOp() = default;

  static LinearOp dense(Matrix a);
  /// Stores only nonzero entries; intended for banded generators.
  static LinearOp sparse(const Matrix& a);
  /// M = left * core * right^H (left: n x r, core: r x r, right: n x r).
  static LinearOp low_rank(Matrix left, Matrix core, Matrix right);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Kind kind() const { return kind_; }

  void apply(const Vector& x, Vector& out, Workspace& ws) const;
  Vector apply(const Vector& x) const;

  Matrix dense_form() const;
  bool is_real() const;

  /// Cheap upper bound on the spectral norm (used for step-size heuristics).
  double norm_bound() const;

 private:
  Kind kind_ = Kind::Dense;
  Index rows_ = 0;
  Index cols_ = 0;
  Matrix dense_;
  Eigen::SparseMatrix<Complex> sparse_;
  Matrix left_, core_, right_;
};

}  // namespace stratostab
