#include "pullback/diffeo.hpp"

#include "pullback/error.hpp"

#include <cmath>

namespace pullback {

namespace {

void check_dim(const Vector& v, std::size_t dim, const char* what) {
  if (std::size_t(v.size()) != dim)
    fail(ErrorKind::dimension_mismatch, std::string(what) + ": expected dimension " + std::to_string(dim) +
                                            ", got " + std::to_string(v.size()));
}

}  // namespace

RowMatrix Diffeomorphism::forward_rows(const RowMatrix& x) const {
  RowMatrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = forward(x.row(r).transpose()).transpose();
  return out;
}

RowMatrix Diffeomorphism::inverse_rows(const RowMatrix& y) const {
  RowMatrix out(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) out.row(r) = inverse(y.row(r).transpose()).transpose();
  return out;
}

GroundTruthDiffeo GroundTruthDiffeo::identity(std::size_t dim) {
  require(dim > 0, ErrorKind::invalid_argument, "identity diffeomorphism needs dim > 0");
  return GroundTruthDiffeo(Kind::identity, dim, 0.0, 0.0, "identity");
}

GroundTruthDiffeo GroundTruthDiffeo::banana(double a, double z) {
  return GroundTruthDiffeo(Kind::banana, 2, a, z, "banana");
}

GroundTruthDiffeo GroundTruthDiffeo::river(double a, double z) {
  return GroundTruthDiffeo(Kind::river, 2, a, z, "river");
}

GroundTruthDiffeo GroundTruthDiffeo::custom(std::size_t dim, Map forward, Map inverse,
                                            JacobianMap jacobian, std::string name) {
  require(forward && inverse && jacobian, ErrorKind::invalid_argument,
          "custom diffeomorphism needs forward, inverse and jacobian");
  GroundTruthDiffeo d(Kind::custom, dim, 0.0, 0.0, std::move(name));
  d.forward_ = std::move(forward);
  d.inverse_ = std::move(inverse);
  d.jacobian_ = std::move(jacobian);
  return d;
}

Vector GroundTruthDiffeo::forward(const Vector& x) const {
  check_dim(x, dim_, "forward");
  switch (kind_) {
    case Kind::identity: return x;
    case Kind::banana: return Vector{{x[0] - a_ * x[1] * x[1] - z_, x[1]}};
    case Kind::river: return Vector{{x[0] - std::sin(a_ * x[1]) - z_, x[1]}};
    case Kind::custom: return forward_(x);
  }
  return x;
}

Vector GroundTruthDiffeo::inverse(const Vector& y) const {
  check_dim(y, dim_, "inverse");
  switch (kind_) {
    case Kind::identity: return y;
    case Kind::banana: return Vector{{y[0] + a_ * y[1] * y[1] + z_, y[1]}};
    case Kind::river: return Vector{{y[0] + std::sin(a_ * y[1]) + z_, y[1]}};
    case Kind::custom: return inverse_(y);
  }
  return y;
}

Matrix GroundTruthDiffeo::jacobian(const Vector& x) const {
  check_dim(x, dim_, "jacobian");
  switch (kind_) {
    case Kind::identity: return Matrix::Identity(Eigen::Index(dim_), Eigen::Index(dim_));
    case Kind::banana: return Matrix{{1.0, -2.0 * a_ * x[1]}, {0.0, 1.0}};
    case Kind::river: return Matrix{{1.0, -a_ * std::cos(a_ * x[1])}, {0.0, 1.0}};
    case Kind::custom: return jacobian_(x);
  }
  return Matrix();
}

}  // namespace pullback
