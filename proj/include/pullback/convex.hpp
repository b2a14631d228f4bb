#pragma once

#include "pullback/tensor.hpp"

#include <cstddef>
#include <vector>

namespace pullback {

/// Smooth strongly convex potential psi together with the gradient of its
/// Fenchel conjugate, which inverts the gradient of psi.
class ConvexPotential {
 public:
  virtual ~ConvexPotential() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(const Vector& v) const = 0;
  virtual Vector grad(const Vector& v) const = 0;
  virtual Vector conjugate_grad(const Vector& w) const = 0;
  /// Hessian of psi at v applied to u.
  virtual Vector hessian_apply(const Vector& v, const Vector& u) const = 0;
  /// Hessian of psi* at w applied to u.
  virtual Vector conjugate_hessian_apply(const Vector& w, const Vector& u) const = 0;
  /// Strong convexity modulus.
  virtual double modulus() const = 0;
};

/// psi(v) = 1/2 v^T A^{-1} v with A = diag(lambda), lambda_i = exp(a_i).
class DiagonalQuadratic final : public ConvexPotential {
 public:
  explicit DiagonalQuadratic(Vector variances);
  static DiagonalQuadratic from_log_variances(const Vector& log_variances);
  static DiagonalQuadratic identity(std::size_t dim);

  std::size_t dim() const override { return std::size_t(variances_.size()); }
  double value(const Vector& v) const override;
  Vector grad(const Vector& v) const override;
  Vector conjugate_grad(const Vector& w) const override;
  Vector hessian_apply(const Vector& v, const Vector& u) const override;
  Vector conjugate_hessian_apply(const Vector& w, const Vector& u) const override;
  double modulus() const override { return 1.0 / variances_.maxCoeff(); }

  const Vector& variances() const noexcept { return variances_; }
  Vector log_variances() const { return variances_.array().log().matrix(); }

  /// Zero-based indices i_1..i_d with lambda_{i_1} >= ... >= lambda_{i_d};
  /// ties keep ascending index order.
  std::vector<std::size_t> sorted_variance_order() const;

 private:
  Vector variances_;
};

std::vector<std::size_t> sorted_variance_order(const Vector& variances);

}  // namespace pullback
