#pragma once

#include "pullback/tensor.hpp"

#include <functional>
#include <string>

namespace pullback {

/// Smooth bijection R^d -> R^d with an explicit inverse and Jacobian.
class Diffeomorphism {
 public:
  virtual ~Diffeomorphism() = default;

  virtual std::size_t dim() const = 0;
  virtual Vector forward(const Vector& x) const = 0;
  virtual Vector inverse(const Vector& y) const = 0;
  virtual Matrix jacobian(const Vector& x) const = 0;
  virtual Vector jvp(const Vector& x, const Vector& v) const { return jacobian(x) * v; }

  /// Row-wise maps over a batch (B x d).
  virtual RowMatrix forward_rows(const RowMatrix& x) const;
  virtual RowMatrix inverse_rows(const RowMatrix& y) const;
};

/// Closed-form diffeomorphisms used as ground truth.
///
///   banana: (x1 - a x2^2 - z, x2)        inverse (y1 + a y2^2 + z, y2)
///   river:  (x1 - sin(a x2) - z, x2)     inverse (y1 + sin(a y2) + z, y2)
class GroundTruthDiffeo final : public Diffeomorphism {
 public:
  enum class Kind { identity, banana, river, custom };

  using Map = std::function<Vector(const Vector&)>;
  using JacobianMap = std::function<Matrix(const Vector&)>;

  static GroundTruthDiffeo identity(std::size_t dim);
  static GroundTruthDiffeo banana(double a = 1.0 / 9.0, double z = 0.0);
  static GroundTruthDiffeo river(double a = 2.0, double z = 0.0);
  static GroundTruthDiffeo custom(std::size_t dim, Map forward, Map inverse, JacobianMap jacobian,
                                  std::string name = "custom");

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  double a() const noexcept { return a_; }
  double z() const noexcept { return z_; }

  std::size_t dim() const override { return dim_; }
  Vector forward(const Vector& x) const override;
  Vector inverse(const Vector& y) const override;
  Matrix jacobian(const Vector& x) const override;

 private:
  GroundTruthDiffeo(Kind kind, std::size_t dim, double a, double z, std::string name)
      : kind_(kind), dim_(dim), a_(a), z_(z), name_(std::move(name)) {}

  Kind kind_;
  std::size_t dim_;
  double a_ = 0.0;
  double z_ = 0.0;
  std::string name_;
  Map forward_;
  Map inverse_;
  JacobianMap jacobian_;
};

}  // namespace pullback
