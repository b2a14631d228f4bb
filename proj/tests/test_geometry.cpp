#include "pullback/convex.hpp"
#include "pullback/diffeo.hpp"
#include "pullback/error.hpp"
#include "pullback/geometry.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace pullback;
using namespace pullback::testing;

namespace {

PullbackManifold banana_manifold(const Vector& variances) {
  return PullbackManifold(std::make_shared<GroundTruthDiffeo>(GroundTruthDiffeo::banana()),
                          std::make_shared<DiagonalQuadratic>(variances));
}

PullbackManifold identity_manifold(std::size_t d) {
  return PullbackManifold(std::make_shared<GroundTruthDiffeo>(GroundTruthDiffeo::identity(d)),
                          std::make_shared<DiagonalQuadratic>(DiagonalQuadratic::identity(d)));
}

void check_close(const Vector& a, const Vector& b, double tol) {
  REQUIRE(a.size() == b.size());
  CHECK((a - b).cwiseAbs().maxCoeff() <= tol);
}

}  // namespace

TEST_CASE("diagonal quadratic by hand") {
  const DiagonalQuadratic unit(Vector{{1.0, 1.0}});
  CHECK(unit.value(Vector{{3.0, 4.0}}) == 12.5);
  CHECK(unit.grad(Vector{{3.0, 4.0}}) == Vector{{3.0, 4.0}});
  CHECK(unit.conjugate_grad(Vector{{3.0, 4.0}}) == Vector{{3.0, 4.0}});

  const DiagonalQuadratic q(Vector{{4.0, 1.0}});
  CHECK(q.grad(Vector{{2.0, 0.0}}) == Vector{{0.5, 0.0}});
  CHECK(q.conjugate_grad(Vector{{0.5, 0.0}}) == Vector{{2.0, 0.0}});
  CHECK(q.modulus() == 0.25);

  CHECK_THROWS_AS(DiagonalQuadratic(Vector{{1.0, 0.0}}), Error);
  CHECK_THROWS_AS(DiagonalQuadratic(Vector{{1.0, -2.0}}), Error);
}

TEST_CASE("conjugate gradient inverts the gradient; gradient is monotone") {
  Rng rng(1);
  const DiagonalQuadratic q(Vector{{0.3, 7.0, 1.5}});
  for (int i = 0; i < 1000; ++i) {
    const Vector v = random_vector(3, rng, 5.0);
    const Vector w = random_vector(3, rng, 5.0);
    CHECK((q.conjugate_grad(q.grad(v)) - v).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((q.grad(v) - q.grad(w)).dot(v - w) >= q.modulus() * (v - w).squaredNorm() - 1e-12);
  }
}

TEST_CASE("quadratic gradient matches finite differences") {
  Rng rng(2);
  const DiagonalQuadratic q(Vector{{0.5, 2.0, 3.0}});
  const Vector v = random_vector(3, rng);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 3; ++i) {
    Vector e = Vector::Zero(3);
    e[i] = h;
    const double fd = (q.value(v + e) - q.value(v - e)) / (2 * h);
    CHECK(fd == doctest::Approx(q.grad(v)[i]).epsilon(1e-8));
  }
}

TEST_CASE("variance order is a stable descending sort") {
  CHECK(sorted_variance_order(Vector{{0.01, 4.0, 1.0}}) == std::vector<std::size_t>{1, 2, 0});
  CHECK(sorted_variance_order(Vector{{2.0, 2.0, 2.0}}) == std::vector<std::size_t>{0, 1, 2});
  CHECK(sorted_variance_order(Vector{{5.0, 3.0, 1.0}}) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("ground-truth diffeomorphisms by hand") {
  const auto banana = GroundTruthDiffeo::banana();
  check_close(banana.forward(Vector{{-1.0, 0.0}}), Vector{{-1.0, 0.0}}, 0.0);
  check_close(banana.inverse(Vector{{-1.0, 3.0}}), Vector{{0.0, 3.0}}, 1e-15);
  const auto river = GroundTruthDiffeo::river();
  check_close(river.forward(Vector{{0.0, M_PI / 2}}), Vector{{0.0, M_PI / 2}}, 1e-15);
  Rng rng(3);
  for (const auto& f : {banana, river}) {
    for (int i = 0; i < 10000; ++i) {
      const Vector x = random_vector(2, rng, 3.0);
      CHECK((f.inverse(f.forward(x)) - x).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("euclidean special case") {
  const auto m = identity_manifold(2);
  check_close(m.geodesic(Vector{{0.0, 0.0}}, Vector{{2.0, 2.0}}, 0.5), Vector{{1.0, 1.0}}, 0.0);
  CHECK(m.distance(Vector{{0.0, 0.0}}, Vector{{3.0, 4.0}}) == 5.0);
  const Vector x{{1.0, -2.0}}, y{{0.5, 4.0}};
  check_close(m.log_map(x, y), y - x, 1e-15);
  check_close(m.exp_map(x, Vector{{0.25, 1.0}}), Vector{{1.25, -1.0}}, 1e-15);
  const Vector pts[] = {Vector{{0.0, 0.0}}, Vector{{2.0, 0.0}}, Vector{{1.0, 3.0}}};
  check_close(m.barycentre(pts), Vector{{1.0, 1.0}}, 1e-15);
  check_close(m.barycentre(std::span<const Vector>(pts, 1)), pts[0], 0.0);

  const RowMatrix c2 = m.geodesic_curve(x, y, 2);
  CHECK(c2.rows() == 2);
  CHECK(Vector(c2.row(0).transpose()) == x);
  CHECK(Vector(c2.row(1).transpose()) == y);
  const RowMatrix c3 = m.geodesic_curve(x, y, 3);
  check_close(c3.row(1).transpose(), (x + y) / 2, 1e-15);
}

TEST_CASE("banana values by hand") {
  const auto m = banana_manifold(Vector{{0.25, 4.0}});
  const Vector a{{0.0, -3.0}}, b{{0.0, 3.0}};
  check_close(m.geodesic(a, b, 0.5), Vector{{-1.0, 0.0}}, 1e-10);
  CHECK(m.distance(a, b) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(std::abs(m.distance(a, b) - 1.5) <= 1e-10);
  const Vector pts[] = {a, b};
  check_close(m.barycentre(pts), Vector{{-1.0, 0.0}}, 1e-10);
  check_close(m.log_map(Vector{{0.0, 0.0}}, b), Vector{{-1.0, 3.0}}, 1e-12);
  check_close(m.exp_map(Vector{{0.0, 0.0}}, Vector{{-1.0, 3.0}}), b, 1e-12);
  CHECK(m.geodesic(a, b, 0.0) == a);
  CHECK(m.geodesic(a, b, 1.0) == b);
  CHECK(m.exp_map(a, Vector::Zero(2)) == a);
  CHECK(m.distance(a, a) == 0.0);
  CHECK(m.distance(a, b) == m.distance(b, a));
}

TEST_CASE("banana curve satisfies the interpolation identity") {
  const auto m = banana_manifold(Vector{{0.25, 4.0}});
  const auto phi = GroundTruthDiffeo::banana();
  const Vector x{{0.4, -2.0}}, y{{-1.0, 1.5}};
  const RowMatrix c = m.geodesic_curve(x, y, 101);
  REQUIRE(c.rows() == 101);
  for (Eigen::Index k = 0; k < c.rows(); ++k) {
    const double t = double(k) / 100.0;
    const Vector expect = (1 - t) * phi.forward(x) + t * phi.forward(y);
    CHECK((phi.forward(c.row(k).transpose()) - expect).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(Vector(c.row(0).transpose()) == x);
  CHECK(Vector(c.row(100).transpose()) == y);
}

TEST_CASE("general and quadratic routes agree on a learned flow") {
  auto flow = std::make_shared<Flow>(random_flow(3, 4, 16, 3, 0.02));
  const PullbackManifold m(flow, std::make_shared<DiagonalQuadratic>(Vector{{0.2, 3.0, 1.3}}));
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Vector x = random_vector(3, rng), y = random_vector(3, rng), v = random_vector(3, rng, 0.5);
    for (double t : {0.0, 0.3, 1.0})
      check_close(m.geodesic(x, y, t, Route::general), m.geodesic(x, y, t, Route::quadratic), 1e-8);
    check_close(m.log_map(x, y, Route::general), m.log_map(x, y, Route::quadratic), 1e-8);
    check_close(m.exp_map(x, v, Route::general), m.exp_map(x, v, Route::quadratic), 1e-8);
    CHECK(std::abs(m.distance(x, y, Route::general) - m.distance(x, y, Route::quadratic)) <= 1e-8);
    const Vector pts[] = {x, y, v};
    check_close(m.barycentre(pts, Route::general), m.barycentre(pts, Route::quadratic), 1e-8);
  }
}

TEST_CASE("exp and log are mutually inverse; distance is consistent with log") {
  auto flow = std::make_shared<Flow>(random_flow(2, 6, 16, 13, 0.02));
  const Vector lambda{{0.5, 2.0}};
  const PullbackManifold m(flow, std::make_shared<DiagonalQuadratic>(lambda));
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Vector x = random_vector(2, rng), y = random_vector(2, rng);
    const Vector v = m.log_map(x, y);
    CHECK((m.exp_map(x, v) - y).norm() <= 1e-6);
    CHECK((m.log_map(x, m.exp_map(x, v)) - v).norm() <= 1e-6);
    CHECK((m.F_inverse(m.F(x)) - x).cwiseAbs().maxCoeff() <= 1e-8);
    const Vector coords = flow->jacobian(x) * v;
    const double d2 = (coords.array() / lambda.array()).square().sum();
    CHECK(m.distance(x, y) * m.distance(x, y) == doctest::Approx(d2).epsilon(1e-8));
  }
}

TEST_CASE("geodesic midpoint density is at least the endpoint minimum") {
  const auto m = banana_manifold(Vector{{0.25, 4.0}});
  const auto phi = GroundTruthDiffeo::banana();
  const DiagonalQuadratic psi(Vector{{0.25, 4.0}});
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Vector x = random_vector(2, rng, 2.0), y = random_vector(2, rng, 2.0);
    const double lx = -psi.value(phi.forward(x)), ly = -psi.value(phi.forward(y));
    const double lm = -psi.value(phi.forward(m.geodesic(x, y, 0.5)));
    CHECK(lm >= std::min(lx, ly) - 1e-12);
  }
}

TEST_CASE("geometry input errors") {
  const auto m = banana_manifold(Vector{{0.25, 4.0}});
  CHECK_THROWS_AS(m.barycentre(std::span<const Vector>()), Error);
  CHECK_THROWS_AS(m.geodesic_curve(Vector::Zero(2), Vector::Ones(2), 1), Error);
  CHECK_THROWS_AS(m.geodesic(Vector::Zero(3), Vector::Ones(2), 0.5), Error);
  CHECK_THROWS_AS(inverse_jacobian_apply(Matrix::Zero(2, 2), Vector::Ones(2)), Error);
}
