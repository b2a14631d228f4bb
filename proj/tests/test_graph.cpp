#include "pullback/graph.hpp"
#include "pullback/error.hpp"
#include "pullback/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace pullback;
using ad::Graph;
using ad::NodeId;
using ad::Parameter;
using ad::Tensor;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

// Values bounded away from the ReLU kink so central differences are exact enough.
Tensor away_from_zero(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data()) {
    const double u = rng.uniform(0.1, 1.0);
    v = rng.uniform() < 0.5 ? -u : u;
  }
  return t;
}

}  // namespace

TEST_CASE("elementwise primal values") {
  Graph g;
  NodeId a = g.constant(Tensor::row({1, 2}));
  NodeId b = g.constant(Tensor::row({3, 4}));
  CHECK(g.value(g.add(a, b)).data() == std::vector<double>{4, 6});
  CHECK(g.value(g.relu(g.constant(Tensor::row({-1, 2})))).data() == std::vector<double>{0, 2});
  CHECK(g.value(g.mul(a, g.constant(Tensor::scalar(3)))).data() == std::vector<double>{3, 6});
}

TEST_CASE("matmul primal") {
  Graph g;
  NodeId a = g.constant(Tensor::from_rows(2, 3, {1, 2, 3, 4, 5, 6}));
  NodeId b = g.constant(Tensor::from_rows(3, 1, {1, 0, 2}));
  const Tensor& c = g.value(g.matmul(a, b));
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 1);
  CHECK(c[0] == 7);
  CHECK(c[1] == 16);
}

TEST_CASE("shape mismatch names the op") {
  Graph g;
  NodeId a = g.constant(Tensor(2, 3));
  NodeId b = g.constant(Tensor(2, 2));
  try {
    g.matmul(a, b);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::shape_mismatch);
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    CHECK(std::string(e.what()).find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(g.add(a, b), Error);
}

TEST_CASE("simple gradients") {
  Parameter p("p", Tensor::row({3}));
  Graph g;
  g.backward(g.sum(g.square(g.parameter(p))));
  CHECK(p.grad[0] == 6);

  Parameter p1("p1", Tensor::scalar(2)), p2("p2", Tensor::scalar(5));
  Graph h;
  h.backward(h.mul(h.parameter(p1), h.parameter(p2)));
  CHECK(p1.grad[0] == 5);
  CHECK(p2.grad[0] == 2);
}

TEST_CASE("backward accumulates and zero_grad clears") {
  Parameter p("p", Tensor::row({1.5, -2}));
  for (int i = 0; i < 2; ++i) {
    Graph g;
    g.backward(g.sum(g.square(g.parameter(p))));
  }
  CHECK(p.grad[0] == 6);
  CHECK(p.grad[1] == -8);
  p.zero_grad();
  CHECK(p.grad[0] == 0);
  CHECK(p.grad[1] == 0);
}

TEST_CASE("non-scalar root is rejected") {
  Parameter p("p", Tensor::row({1, 2}));
  Graph g;
  NodeId y = g.square(g.parameter(p));
  CHECK_THROWS_AS(g.backward(y), Error);
}

TEST_CASE("node inputs precede the node") {
  Parameter p("p", Tensor::row({1, 2}));
  Graph g;
  NodeId x = g.parameter(p);
  NodeId y = g.sum(g.mul(g.exp(x), g.sin(x)));
  for (std::uint32_t i = 0; i <= y.index; ++i)
    for (NodeId in : g.inputs(NodeId{i})) CHECK(in.index < i);
}

TEST_CASE("quadratic gradient check is exact") {
  Rng rng(3);
  Parameter p("p", random_tensor(1, 5, rng));
  Parameter* ps[] = {&p};
  const double err = ad::grad_check(
      [&](Graph& g) { return g.scale(g.l2_norm_sq(g.parameter(p)), 0.5); }, ps, 1e-5);
  CHECK(err <= 1e-8);
}

TEST_CASE("every primitive matches finite differences") {
  Rng rng(11);
  Parameter a("a", away_from_zero(3, 4, rng));
  Parameter b("b", away_from_zero(3, 4, rng));
  Parameter row("row", away_from_zero(1, 4, rng));
  Parameter col("col", away_from_zero(3, 1, rng));
  Parameter w("w", random_tensor(4, 2, rng));
  Parameter pos("pos", Tensor(3, 4, 0.0));
  for (double& v : pos.value.data()) v = rng.uniform(0.5, 2.0);
  Parameter* ps[] = {&a, &b, &row, &col, &w, &pos};

  const auto loss = [&](Graph& g) {
    NodeId A = g.parameter(a), B = g.parameter(b), R = g.parameter(row), C = g.parameter(col);
    NodeId W = g.parameter(w), P = g.parameter(pos);
    std::vector<NodeId> terms;
    terms.push_back(g.sum(g.add(A, R)));
    terms.push_back(g.sum(g.mul(g.sub(A, B), C)));
    terms.push_back(g.sum(g.div(A, P)));
    terms.push_back(g.sum(g.div(A, g.add(g.square(R), g.constant(Tensor::scalar(1))))));
    terms.push_back(g.sum(g.square(g.matmul(A, W))));
    terms.push_back(g.sum(g.mul(g.relu(A), B)));
    terms.push_back(g.sum(g.mul(g.relu_mask(A), g.square(B))));
    terms.push_back(g.mean(g.exp(g.scale(B, 0.5))));
    terms.push_back(g.sum(g.log(P)));
    terms.push_back(g.sum(g.mul(g.sin(A), g.cos(B))));
    terms.push_back(g.sum(g.tanh(g.mul(A, B))));
    terms.push_back(g.sum(g.square(g.sum_rows(g.mul(A, B)))));
    terms.push_back(g.l2_norm_sq(g.slice_cols(A, {0, 2})));
    const NodeId parts[] = {A, B};
    terms.push_back(g.sum(g.square(g.concat_rows(parts))));
    terms.push_back(g.sum(g.mul(g.concat_cols(parts), g.concat_cols(parts))));
    terms.push_back(g.sum(g.square(g.tile_rows(R, 3))));
    terms.push_back(g.sum(g.square(g.gram(g.concat_rows(parts), 2))));
    NodeId total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) total = g.add(total, terms[i]);
    return total;
  };
  CHECK(ad::grad_check(loss, ps, 1e-5) <= 1e-5);
}

TEST_CASE("random two-layer MLP gradient") {
  Rng rng(5);
  const Tensor x = random_tensor(16, 3, rng);
  const Tensor y = random_tensor(16, 2, rng);
  Parameter w1("w1", random_tensor(3, 8, rng, 0.5)), b1("b1", random_tensor(1, 8, rng, 0.1));
  Parameter w2("w2", random_tensor(8, 2, rng, 0.5)), b2("b2", random_tensor(1, 2, rng, 0.1));
  Parameter* ps[] = {&w1, &b1, &w2, &b2};
  const auto loss = [&](Graph& g) {
    NodeId h = g.relu(g.add(g.matmul(g.constant(x), g.parameter(w1)), g.parameter(b1)));
    NodeId out = g.add(g.matmul(h, g.parameter(w2)), g.parameter(b2));
    return g.mean(g.square(g.sub(out, g.constant(y))));
  };
  CHECK(ad::grad_check(loss, ps, 1e-5) <= 1e-5);
}

TEST_CASE("linearity of accumulation and bitwise replay") {
  Rng rng(8);
  Parameter p("p", random_tensor(2, 3, rng));
  auto f1 = [&](Graph& g) { return g.sum(g.sin(g.parameter(p))); };
  auto f2 = [&](Graph& g) { return g.l2_norm_sq(g.parameter(p)); };

  p.zero_grad();
  {
    Graph g;
    g.backward(g.add(f1(g), f2(g)));
  }
  const Tensor joint = p.grad;

  p.zero_grad();
  {
    Graph g;
    g.backward(f1(g));
  }
  {
    Graph g;
    g.backward(f2(g));
  }
  for (std::size_t i = 0; i < joint.size(); ++i) CHECK(p.grad[i] == doctest::Approx(joint[i]).epsilon(1e-14));

  p.zero_grad();
  Graph g;
  NodeId root = g.add(f1(g), f2(g));
  g.backward(root);
  const Tensor first = p.grad;
  p.zero_grad();
  g.backward(root);
  CHECK(p.grad.data() == first.data());
}

TEST_CASE("gram of stacked blocks") {
  Graph g;
  // blocks of height 2: block0 rows (1,2),(0,1); block1 rows (3,0),(1,1)
  NodeId s = g.constant(Tensor::from_rows(4, 2, {1, 2, 0, 1, 3, 0, 1, 1}));
  const Tensor& gm = g.value(g.gram(s, 2));
  REQUIRE(gm.rows() == 2);
  REQUIRE(gm.cols() == 4);
  CHECK(gm(0, 0) == 5);
  CHECK(gm(0, 1) == 3);
  CHECK(gm(0, 2) == 3);
  CHECK(gm(0, 3) == 9);
  CHECK(gm(1, 0) == 1);
  CHECK(gm(1, 1) == 1);
  CHECK(gm(1, 3) == 2);
}
