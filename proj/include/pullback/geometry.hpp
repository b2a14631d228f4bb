#pragma once

#include "pullback/convex.hpp"
#include "pullback/diffeo.hpp"

#include <memory>
#include <span>
#include <vector>

namespace pullback {

/// Which closed form to evaluate. `automatic` picks the quadratic forms when
/// the potential is a DiagonalQuadratic; both routes agree algebraically.
enum class Route { automatic, general, quadratic };

/// R^d with the pullback metric (u, v)_x = (D_x F[u], D_x F[v])_2 where
/// F = grad(psi) o phi. Geodesics, log/exp maps, distances and barycentres
/// are all closed form through F and F^{-1} = phi^{-1} o grad(psi*).
class PullbackManifold {
 public:
  PullbackManifold(std::shared_ptr<const Diffeomorphism> phi,
                   std::shared_ptr<const ConvexPotential> psi);

  std::size_t dim() const { return phi_->dim(); }
  const Diffeomorphism& diffeo() const { return *phi_; }
  const ConvexPotential& potential() const { return *psi_; }
  /// Non-null iff the potential is a diagonal quadratic.
  const DiagonalQuadratic* quadratic() const { return quadratic_; }

  Vector F(const Vector& x) const;
  Vector F_inverse(const Vector& w) const;

  Vector geodesic(const Vector& x, const Vector& y, double t, Route route = Route::automatic) const;
  /// T points at t_k = k / (T - 1), k = 0..T-1; the first and last rows are x and y.
  RowMatrix geodesic_curve(const Vector& x, const Vector& y, std::size_t steps,
                           Route route = Route::automatic) const;
  Vector log_map(const Vector& x, const Vector& y, Route route = Route::automatic) const;
  Vector exp_map(const Vector& x, const Vector& v, Route route = Route::automatic) const;
  double distance(const Vector& x, const Vector& y, Route route = Route::automatic) const;
  Vector barycentre(std::span<const Vector> points, Route route = Route::automatic) const;
  Vector barycentre(const RowMatrix& points, Route route = Route::automatic) const;

 private:
  bool use_quadratic(Route route) const;
  void check(const Vector& v, const char* what) const;

  std::shared_ptr<const Diffeomorphism> phi_;
  std::shared_ptr<const ConvexPotential> psi_;
  const DiagonalQuadratic* quadratic_ = nullptr;
};

/// Solves D_{phi(x)} phi^{-1} [w] = (D_x phi)^{-1} w by LU factorisation.
Vector inverse_jacobian_apply(const Matrix& jacobian, const Vector& w);

}  // namespace pullback
