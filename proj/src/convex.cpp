#include "pullback/convex.hpp"

#include "pullback/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pullback {

DiagonalQuadratic::DiagonalQuadratic(Vector variances) : variances_(std::move(variances)) {
  require(variances_.size() > 0, ErrorKind::invalid_argument, "variances must be non-empty");
  for (Eigen::Index i = 0; i < variances_.size(); ++i)
    require(variances_[i] > 0.0 && std::isfinite(variances_[i]), ErrorKind::invalid_argument,
            "variances must be positive and finite");
}

DiagonalQuadratic DiagonalQuadratic::from_log_variances(const Vector& log_variances) {
  return DiagonalQuadratic(log_variances.array().exp().matrix());
}

DiagonalQuadratic DiagonalQuadratic::identity(std::size_t dim) {
  return DiagonalQuadratic(Vector::Ones(Eigen::Index(dim)));
}

double DiagonalQuadratic::value(const Vector& v) const {
  return 0.5 * (v.array().square() / variances_.array()).sum();
}

Vector DiagonalQuadratic::grad(const Vector& v) const {
  return (v.array() / variances_.array()).matrix();
}

Vector DiagonalQuadratic::conjugate_grad(const Vector& w) const {
  return (w.array() * variances_.array()).matrix();
}

Vector DiagonalQuadratic::hessian_apply(const Vector&, const Vector& u) const {
  return (u.array() / variances_.array()).matrix();
}

Vector DiagonalQuadratic::conjugate_hessian_apply(const Vector&, const Vector& u) const {
  return (u.array() * variances_.array()).matrix();
}

std::vector<std::size_t> DiagonalQuadratic::sorted_variance_order() const {
  return pullback::sorted_variance_order(variances_);
}

std::vector<std::size_t> sorted_variance_order(const Vector& variances) {
  std::vector<std::size_t> order(std::size_t(variances.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return variances[Eigen::Index(a)] > variances[Eigen::Index(b)];
  });
  return order;
}

}  // namespace pullback
