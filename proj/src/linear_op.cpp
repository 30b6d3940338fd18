#include "stratostab/linear_op.hpp"

namespace stratostab {

LinearOp LinearOp::dense(Matrix a) {
  LinearOp op;
  op.kind_ = Kind::Dense;
  op.rows_ = a.rows();
  op.cols_ = a.cols();
  op.dense_ = std::move(a);
  return op;
}

LinearOp LinearOp::sparse(const Matrix& a) {
  LinearOp op;
  op.kind_ = Kind::Sparse;
  op.rows_ = a.rows();
  op.cols_ = a.cols();
  std::vector<Eigen::Triplet<Complex>> trips;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (a(i, j) != Complex(0, 0)) trips.emplace_back(i, j, a(i, j));
  op.sparse_.resize(a.rows(), a.cols());
  op.sparse_.setFromTriplets(trips.begin(), trips.end());
  op.sparse_.makeCompressed();
  return op;
}

LinearOp LinearOp::low_rank(Matrix left, Matrix core, Matrix right) {
  if (left.cols() != core.rows() || core.cols() != right.cols())
    throw ConfigError("LinearOp::low_rank: factor dimensions do not match");
  LinearOp op;
  op.kind_ = Kind::LowRank;
  op.rows_ = left.rows();
  op.cols_ = right.rows();
  op.left_ = std::move(left);
  op.core_ = std::move(core);
  op.right_ = std::move(right);
  return op;
}

void LinearOp::apply(const Vector& x, Vector& out, Workspace& ws) const {
  switch (kind_) {
    case Kind::Dense:
      out.noalias() = dense_ * x;
      break;
    case Kind::Sparse:
      out.noalias() = sparse_ * x;
      break;
    case Kind::LowRank:
      ws.small_a.noalias() = right_.adjoint() * x;
      ws.small_b.noalias() = core_ * ws.small_a;
      out.noalias() = left_ * ws.small_b;
      break;
  }
}

Vector LinearOp::apply(const Vector& x) const {
  Vector out(rows_);
  Workspace ws;
  apply(x, out, ws);
  return out;
}

Matrix LinearOp::dense_form() const {
  switch (kind_) {
    case Kind::Dense:
      return dense_;
    case Kind::Sparse:
      return Matrix(sparse_);
    case Kind::LowRank:
      return left_ * core_ * right_.adjoint();
  }
  return {};
}

bool LinearOp::is_real() const {
  switch (kind_) {
    case Kind::Dense:
      return is_real_matrix(dense_);
    case Kind::Sparse:
      return is_real_matrix(Matrix(sparse_));
    case Kind::LowRank:
      return is_real_matrix(left_) && is_real_matrix(core_) && is_real_matrix(right_);
  }
  return true;
}

double LinearOp::norm_bound() const {
  switch (kind_) {
    case Kind::Dense:
      return dense_.cwiseAbs().rowwise().sum().maxCoeff();
    case Kind::Sparse:
      return Matrix(sparse_).cwiseAbs().rowwise().sum().maxCoeff();
    case Kind::LowRank:
      return left_.norm() * core_.norm() * right_.norm();
  }
  return 0.0;
}

}  // namespace stratostab
