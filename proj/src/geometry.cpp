#include "pullback/geometry.hpp"

#include "pullback/error.hpp"

#include <Eigen/LU>

#include <cmath>

namespace pullback {

PullbackManifold::PullbackManifold(std::shared_ptr<const Diffeomorphism> phi,
                                   std::shared_ptr<const ConvexPotential> psi)
    : phi_(std::move(phi)), psi_(std::move(psi)) {
  require(phi_ && psi_, ErrorKind::invalid_argument, "manifold needs a diffeomorphism and a potential");
  require(phi_->dim() == psi_->dim(), ErrorKind::dimension_mismatch,
          "diffeomorphism dimension " + std::to_string(phi_->dim()) +
              " differs from potential dimension " + std::to_string(psi_->dim()));
  quadratic_ = dynamic_cast<const DiagonalQuadratic*>(psi_.get());
}

bool PullbackManifold::use_quadratic(Route route) const {
  if (route == Route::general) return false;
  if (route == Route::quadratic) {
    require(quadratic_ != nullptr, ErrorKind::invalid_argument,
            "quadratic route requested for a non-quadratic potential");
    return true;
  }
  return quadratic_ != nullptr;
}

void PullbackManifold::check(const Vector& v, const char* what) const {
  require(std::size_t(v.size()) == dim(), ErrorKind::dimension_mismatch,
          std::string(what) + " has dimension " + std::to_string(v.size()) + ", manifold has " +
              std::to_string(dim()));
}

Vector PullbackManifold::F(const Vector& x) const { return psi_->grad(phi_->forward(x)); }

Vector PullbackManifold::F_inverse(const Vector& w) const {
  return phi_->inverse(psi_->conjugate_grad(w));
}

Vector inverse_jacobian_apply(const Matrix& jacobian, const Vector& w) {
  Eigen::FullPivLU<Matrix> lu(jacobian);
  require(lu.isInvertible(), ErrorKind::numeric, "singular Jacobian in inverse-Jacobian solve");
  Vector out = lu.solve(w);
  require(out.allFinite(), ErrorKind::numeric, "non-finite inverse-Jacobian solve");
  return out;
}

Vector PullbackManifold::geodesic(const Vector& x, const Vector& y, double t, Route route) const {
  check(x, "geodesic start");
  check(y, "geodesic end");
  require(t >= 0.0 && t <= 1.0, ErrorKind::invalid_argument, "geodesic time must lie in [0, 1]");
  if (t == 0.0) return x;
  if (t == 1.0) return y;
  if (use_quadratic(route))
    return phi_->inverse((1.0 - t) * phi_->forward(x) + t * phi_->forward(y));
  return F_inverse((1.0 - t) * F(x) + t * F(y));
}

RowMatrix PullbackManifold::geodesic_curve(const Vector& x, const Vector& y, std::size_t steps,
                                           Route route) const {
  check(x, "geodesic start");
  check(y, "geodesic end");
  require(steps >= 2, ErrorKind::invalid_argument, "geodesic curve needs at least 2 steps");
  const auto T = Eigen::Index(steps);
  const auto d = Eigen::Index(dim());
  const bool quad = use_quadratic(route);

  Vector a, b;
  if (quad) {
    a = phi_->forward(x);
    b = phi_->forward(y);
  } else {
    a = F(x);
    b = F(y);
  }
  RowMatrix mixed(T, d);
  for (Eigen::Index k = 0; k < T; ++k) {
    const double t = double(k) / double(T - 1);
    mixed.row(k) = ((1.0 - t) * a + t * b).transpose();
  }
  if (!quad) {
    for (Eigen::Index k = 0; k < T; ++k)
      mixed.row(k) = psi_->conjugate_grad(mixed.row(k).transpose()).transpose();
  }
  RowMatrix curve = phi_->inverse_rows(mixed);
  curve.row(0) = x.transpose();
  curve.row(T - 1) = y.transpose();
  return curve;
}

Vector PullbackManifold::log_map(const Vector& x, const Vector& y, Route route) const {
  check(x, "log base point");
  check(y, "log target");
  const Vector px = phi_->forward(x);
  const Vector py = phi_->forward(y);
  Vector w;
  if (use_quadratic(route)) {
    w = py - px;
  } else {
    const Vector fx = psi_->grad(px);
    const Vector fy = psi_->grad(py);
    w = psi_->conjugate_hessian_apply(fx, fy - fx);
  }
  return inverse_jacobian_apply(phi_->jacobian(x), w);
}

Vector PullbackManifold::exp_map(const Vector& x, const Vector& v, Route route) const {
  check(x, "exp base point");
  check(v, "exp tangent");
  if (v.isZero(0.0)) return x;
  const Vector px = phi_->forward(x);
  const Vector dv = phi_->jvp(x, v);
  if (use_quadratic(route)) return phi_->inverse(px + dv);
  return F_inverse(psi_->grad(px) + psi_->hessian_apply(px, dv));
}

double PullbackManifold::distance(const Vector& x, const Vector& y, Route route) const {
  check(x, "distance argument");
  check(y, "distance argument");
  if (use_quadratic(route)) {
    const Vector diff = phi_->forward(x) - phi_->forward(y);
    return (diff.array() / quadratic_->variances().array()).matrix().norm();
  }
  return (F(x) - F(y)).norm();
}

Vector PullbackManifold::barycentre(std::span<const Vector> points, Route route) const {
  require(!points.empty(), ErrorKind::invalid_argument, "barycentre of an empty point set");
  RowMatrix rows(Eigen::Index(points.size()), Eigen::Index(dim()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    check(points[i], "barycentre point");
    rows.row(Eigen::Index(i)) = points[i].transpose();
  }
  return barycentre(rows, route);
}

Vector PullbackManifold::barycentre(const RowMatrix& points, Route route) const {
  require(points.rows() > 0, ErrorKind::invalid_argument, "barycentre of an empty point set");
  require(std::size_t(points.cols()) == dim(), ErrorKind::dimension_mismatch,
          "barycentre points have the wrong dimension");
  if (points.rows() == 1) return points.row(0).transpose();
  const RowMatrix mapped = phi_->forward_rows(points);
  if (use_quadratic(route)) {
    const Vector mean = mapped.colwise().mean().transpose();
    return phi_->inverse(mean);
  }
  Vector mean = Vector::Zero(Eigen::Index(dim()));
  for (Eigen::Index r = 0; r < mapped.rows(); ++r) mean += psi_->grad(mapped.row(r).transpose());
  mean /= double(mapped.rows());
  return F_inverse(mean);
}

}  // namespace pullback
