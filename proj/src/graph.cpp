#include "pullback/graph.hpp"

#include "pullback/error.hpp"

#include <algorithm>
#include <cmath>

namespace pullback::ad {

namespace {

enum class Broadcast { none, row, col, scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::none;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::col;
  return Broadcast::none;
}

bool broadcast_compatible(const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return true;
  return broadcast_kind(a, b) != Broadcast::none;
}

inline std::size_t b_index(Broadcast k, std::size_t r, std::size_t c, std::size_t cols) {
  switch (k) {
    case Broadcast::none: return r * cols + c;
    case Broadcast::row: return c;
    case Broadcast::col: return r;
    case Broadcast::scalar: return 0;
  }
  return 0;
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  const Broadcast k = broadcast_kind(a, b);
  const std::size_t rows = a.rows(), cols = a.cols();
  Tensor out(rows, cols);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  if (k == Broadcast::none && a.size() == b.size()) {
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) po[r * cols + c] = f(pa[r * cols + c], pb[b_index(k, r, c, cols)]);
  return out;
}

[[noreturn]] void shape_error(Op op, const std::vector<const Tensor*>& ins) {
  std::string msg = std::string("op '") + to_string(op) + "' got incompatible shapes";
  for (const Tensor* t : ins) msg += " " + t->shape_string();
  fail(ErrorKind::shape_mismatch, msg);
}

std::size_t arity(Op op) {
  switch (op) {
    case Op::constant:
    case Op::parameter: return 0;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div:
    case Op::matmul: return 2;
    case Op::concat_rows:
    case Op::concat_cols: return std::size_t(-1);
    default: return 1;
  }
}

}  // namespace

const char* to_string(Op op) noexcept {
  switch (op) {
    case Op::constant: return "constant";
    case Op::parameter: return "parameter";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::matmul: return "matmul";
    case Op::relu: return "relu";
    case Op::relu_mask_stop_gradient: return "relu_mask_stop_gradient";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::tanh: return "tanh";
    case Op::square: return "square";
    case Op::sum: return "sum";
    case Op::sum_rows: return "sum_rows";
    case Op::mean: return "mean";
    case Op::l2_norm_sq: return "l2_norm_sq";
    case Op::concat_rows: return "concat_rows";
    case Op::concat_cols: return "concat_cols";
    case Op::slice_cols: return "slice_cols";
    case Op::scale_by_constant: return "scale_by_constant";
    case Op::gram: return "gram";
  }
  return "unknown";
}

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()) {}

NodeId Graph::push(Node node) {
  require(nodes_.size() < std::size_t(UINT32_MAX), ErrorKind::numeric, "graph too large");
  nodes_.push_back(std::move(node));
  return NodeId{std::uint32_t(nodes_.size() - 1)};
}

NodeId Graph::constant(Tensor value) {
  Node n{Op::constant, {}, std::move(value), nullptr, {}, false};
  return push(std::move(n));
}

NodeId Graph::parameter(Parameter& param) {
  Node n{Op::parameter, {}, Tensor{}, &param, {}, param.trainable};
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = nodes_.at(id.index);
  return n.param ? n.param->value : n.value;
}

NodeId Graph::slice_cols(NodeId a, std::vector<std::size_t> columns) {
  OpAttrs attrs;
  attrs.columns = std::move(columns);
  return record(Op::slice_cols, std::span<const NodeId>(&a, 1), std::move(attrs));
}

NodeId Graph::scale(NodeId a, double factor) {
  OpAttrs attrs;
  attrs.constant = factor;
  return record(Op::scale_by_constant, std::span<const NodeId>(&a, 1), std::move(attrs));
}

NodeId Graph::gram(NodeId stacked, std::size_t blocks) {
  OpAttrs attrs;
  attrs.blocks = blocks;
  return record(Op::gram, std::span<const NodeId>(&stacked, 1), std::move(attrs));
}

NodeId Graph::tile_rows(NodeId a, std::size_t copies) {
  if (copies == 1) return a;
  std::vector<NodeId> parts(copies, a);
  return concat_rows(parts);
}

NodeId Graph::record(Op op, std::span<const NodeId> inputs, OpAttrs attrs) {
  require(op != Op::constant && op != Op::parameter, ErrorKind::invalid_argument,
          "leaf nodes are created with constant() / parameter()");
  const std::size_t want = arity(op);
  require(want == std::size_t(-1) ? !inputs.empty() : inputs.size() == want,
          ErrorKind::invalid_argument,
          std::string("op '") + to_string(op) + "' got wrong number of inputs");
  for (NodeId in : inputs)
    require(in.index < nodes_.size(), ErrorKind::invalid_argument,
            std::string("op '") + to_string(op) + "' references an unknown node");

  Node node{op, std::vector<NodeId>(inputs.begin(), inputs.end()), Tensor{}, nullptr,
            std::move(attrs), false};
  if (op != Op::relu_mask_stop_gradient)
    for (NodeId in : inputs) node.needs_grad = node.needs_grad || nodes_[in.index].needs_grad;

  const Tensor& a = value(inputs[0]);
  switch (op) {
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      const Tensor& b = value(inputs[1]);
      if (!broadcast_compatible(a, b)) shape_error(op, {&a, &b});
      if (op == Op::add) node.value = map_binary(a, b, [](double x, double y) { return x + y; });
      if (op == Op::sub) node.value = map_binary(a, b, [](double x, double y) { return x - y; });
      if (op == Op::mul) node.value = map_binary(a, b, [](double x, double y) { return x * y; });
      if (op == Op::div) node.value = map_binary(a, b, [](double x, double y) { return x / y; });
      break;
    }
    case Op::matmul: {
      const Tensor& b = value(inputs[1]);
      if (a.cols() != b.rows()) shape_error(op, {&a, &b});
      node.value = Tensor(a.rows(), b.cols());
      node.value.matrix().noalias() = a.matrix() * b.matrix();
      break;
    }
    case Op::relu: node.value = map_unary(a, [](double x) { return x > 0.0 ? x : 0.0; }); break;
    case Op::relu_mask_stop_gradient:
      node.value = map_unary(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
      break;
    case Op::exp: node.value = map_unary(a, [](double x) { return std::exp(x); }); break;
    case Op::log: node.value = map_unary(a, [](double x) { return std::log(x); }); break;
    case Op::sin: node.value = map_unary(a, [](double x) { return std::sin(x); }); break;
    case Op::cos: node.value = map_unary(a, [](double x) { return std::cos(x); }); break;
    case Op::tanh: node.value = map_unary(a, [](double x) { return std::tanh(x); }); break;
    case Op::square: node.value = map_unary(a, [](double x) { return x * x; }); break;
    case Op::sum: {
      double s = 0.0;
      for (double v : a.data()) s += v;
      node.value = Tensor::scalar(s);
      break;
    }
    case Op::sum_rows: {
      node.value = Tensor(a.rows(), 1);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c);
        node.value[r] = s;
      }
      break;
    }
    case Op::mean: {
      require(a.size() > 0, ErrorKind::shape_mismatch, "mean of empty tensor");
      double s = 0.0;
      for (double v : a.data()) s += v;
      node.value = Tensor::scalar(s / double(a.size()));
      break;
    }
    case Op::l2_norm_sq: {
      double s = 0.0;
      for (double v : a.data()) s += v * v;
      node.value = Tensor::scalar(s);
      break;
    }
    case Op::concat_rows: {
      std::size_t rows = 0;
      for (NodeId in : inputs) {
        const Tensor& t = value(in);
        if (t.cols() != a.cols()) shape_error(op, {&a, &t});
        rows += t.rows();
      }
      node.value = Tensor(rows, a.cols());
      auto it = node.value.data().begin();
      for (NodeId in : inputs) it = std::copy(value(in).data().begin(), value(in).data().end(), it);
      break;
    }
    case Op::concat_cols: {
      std::size_t cols = 0;
      for (NodeId in : inputs) {
        const Tensor& t = value(in);
        if (t.rows() != a.rows()) shape_error(op, {&a, &t});
        cols += t.cols();
      }
      node.value = Tensor(a.rows(), cols);
      std::size_t offset = 0;
      for (NodeId in : inputs) {
        const Tensor& t = value(in);
        for (std::size_t r = 0; r < t.rows(); ++r)
          for (std::size_t c = 0; c < t.cols(); ++c) node.value(r, offset + c) = t(r, c);
        offset += t.cols();
      }
      break;
    }
    case Op::slice_cols: {
      for (std::size_t c : node.attrs.columns)
        require(c < a.cols(), ErrorKind::shape_mismatch,
                "slice_cols index " + std::to_string(c) + " out of range for " + a.shape_string());
      node.value = Tensor(a.rows(), node.attrs.columns.size());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t j = 0; j < node.attrs.columns.size(); ++j)
          node.value(r, j) = a(r, node.attrs.columns[j]);
      break;
    }
    case Op::scale_by_constant: {
      const double f = node.attrs.constant;
      node.value = map_unary(a, [f](double x) { return f * x; });
      break;
    }
    case Op::gram: {
      const std::size_t k = node.attrs.blocks;
      require(k > 0 && a.rows() % k == 0, ErrorKind::shape_mismatch,
              "gram: " + a.shape_string() + " is not divisible into " + std::to_string(k) +
                  " row blocks");
      const std::size_t batch = a.rows() / k;
      node.value = Tensor(batch, k * k);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = i; j < k; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < a.cols(); ++c) s += a(i * batch + b, c) * a(j * batch + b, c);
            node.value(b, i * k + j) = s;
            node.value(b, j * k + i) = s;
          }
      break;
    }
    case Op::constant:
    case Op::parameter: break;
  }
  return push(std::move(node));
}

const Tensor& Graph::gradient(NodeId id) const {
  static const Tensor kEmpty;
  if (id.index >= grads_.size()) return kEmpty;
  return grads_[id.index];
}

void Graph::backward(NodeId root) {
  require(root.index < nodes_.size(), ErrorKind::invalid_argument, "backward: unknown root");
  const Tensor& rv = value(root);
  require(rv.size() == 1, ErrorKind::shape_mismatch,
          "backward needs a scalar root, got " + rv.shape_string());

  grads_.assign(nodes_.size(), Tensor{});
  grads_[root.index] = Tensor(rv.rows(), rv.cols(), 1.0);

  for (std::size_t id = root.index + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.needs_grad || grads_[id].empty()) continue;
    if (node.op == Op::parameter) {
      Parameter& p = *node.param;
      if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.rows(), p.value.cols());
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += grads_[id][i];
      continue;
    }
    propagate(node, grads_[id]);
  }
}

void Graph::propagate(const Node& node, const Tensor& g) {
  auto slot = [this](NodeId in) -> Tensor* {
    Node& n = nodes_[in.index];
    if (!n.needs_grad) return nullptr;
    Tensor& t = grads_[in.index];
    if (t.empty()) {
      const Tensor& v = value(in);
      t = Tensor(v.rows(), v.cols());
    }
    return &t;
  };

  const Tensor& a = value(node.inputs[0]);
  switch (node.op) {
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      const Tensor& b = value(node.inputs[1]);
      const Broadcast k = broadcast_kind(a, b);
      Tensor* ga = slot(node.inputs[0]);
      Tensor* gb = slot(node.inputs[1]);
      const std::size_t rows = a.rows(), cols = a.cols();
      const double* pa = a.data().data();
      const double* pb = b.data().data();
      const double* pg = g.data().data();
      double* pga = ga ? ga->data().data() : nullptr;
      double* pgb = gb ? gb->data().data() : nullptr;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t i = r * cols + c;
          const std::size_t j = b_index(k, r, c, cols);
          const double gv = pg[i];
          switch (node.op) {
            case Op::add:
              if (pga) pga[i] += gv;
              if (pgb) pgb[j] += gv;
              break;
            case Op::sub:
              if (pga) pga[i] += gv;
              if (pgb) pgb[j] -= gv;
              break;
            case Op::mul:
              if (pga) pga[i] += gv * pb[j];
              if (pgb) pgb[j] += gv * pa[i];
              break;
            default:
              if (pga) pga[i] += gv / pb[j];
              if (pgb) pgb[j] -= gv * pa[i] / (pb[j] * pb[j]);
              break;
          }
        }
      break;
    }
    case Op::matmul: {
      const Tensor& b = value(node.inputs[1]);
      if (Tensor* ga = slot(node.inputs[0])) ga->matrix().noalias() += g.matrix() * b.matrix().transpose();
      if (Tensor* gb = slot(node.inputs[1])) gb->matrix().noalias() += a.matrix().transpose() * g.matrix();
      break;
    }
    case Op::relu:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += a[i] > 0.0 ? g[i] : 0.0;
      break;
    case Op::exp:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += g[i] * node.value[i];
      break;
    case Op::log:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += g[i] / a[i];
      break;
    case Op::sin:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += g[i] * std::cos(a[i]);
      break;
    case Op::cos:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] -= g[i] * std::sin(a[i]);
      break;
    case Op::tanh:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i)
          (*ga)[i] += g[i] * (1.0 - node.value[i] * node.value[i]);
      break;
    case Op::square:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += 2.0 * a[i] * g[i];
      break;
    case Op::sum:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += g[0];
      break;
    case Op::sum_rows:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t r = 0; r < a.rows(); ++r)
          for (std::size_t c = 0; c < a.cols(); ++c) (*ga)(r, c) += g[r];
      break;
    case Op::mean:
      if (Tensor* ga = slot(node.inputs[0])) {
        const double s = g[0] / double(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += s;
      }
      break;
    case Op::l2_norm_sq:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += 2.0 * a[i] * g[0];
      break;
    case Op::concat_rows: {
      std::size_t offset = 0;
      for (NodeId in : node.inputs) {
        const std::size_t n = value(in).size();
        if (Tensor* gi = slot(in))
          for (std::size_t i = 0; i < n; ++i) (*gi)[i] += g[offset + i];
        offset += n;
      }
      break;
    }
    case Op::concat_cols: {
      std::size_t offset = 0;
      for (NodeId in : node.inputs) {
        const Tensor& t = value(in);
        if (Tensor* gi = slot(in))
          for (std::size_t r = 0; r < t.rows(); ++r)
            for (std::size_t c = 0; c < t.cols(); ++c) (*gi)(r, c) += g(r, offset + c);
        offset += t.cols();
      }
      break;
    }
    case Op::slice_cols:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t r = 0; r < a.rows(); ++r)
          for (std::size_t j = 0; j < node.attrs.columns.size(); ++j)
            (*ga)(r, node.attrs.columns[j]) += g(r, j);
      break;
    case Op::scale_by_constant:
      if (Tensor* ga = slot(node.inputs[0]))
        for (std::size_t i = 0; i < a.size(); ++i) (*ga)[i] += node.attrs.constant * g[i];
      break;
    case Op::gram:
      if (Tensor* ga = slot(node.inputs[0])) {
        const std::size_t k = node.attrs.blocks;
        const std::size_t batch = a.rows() / k;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              const double w = g(b, i * k + j) + g(b, j * k + i);
              if (w == 0.0) continue;
              for (std::size_t c = 0; c < a.cols(); ++c)
                (*ga)(i * batch + b, c) += w * a(j * batch + b, c);
            }
      }
      break;
    case Op::relu_mask_stop_gradient:
    case Op::constant:
    case Op::parameter: break;
  }
}

double grad_check(const std::function<NodeId(Graph&)>& loss, std::span<Parameter* const> params,
                  double h) {
  require(h > 0.0, ErrorKind::invalid_argument, "grad_check step must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  auto eval = [&]() {
    Graph g;
    return g.value(loss(g)).item();
  };

  double worst = 0.0;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = eval();
      p->value[i] = saved - h;
      const double down = eval();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(p->grad[i] - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace pullback::ad
