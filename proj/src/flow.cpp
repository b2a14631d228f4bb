#include "pullback/flow.hpp"

#include "pullback/error.hpp"

#include <Eigen/LU>

#include <cmath>

namespace pullback {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

std::vector<bool> coupling_mask(std::size_t dim, std::size_t layer) {
  std::vector<bool> mask(dim);
  for (std::size_t i = 0; i < dim; ++i) mask[i] = (i % 2 == 0) == (layer % 2 == 0);
  return mask;
}

namespace {

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void check_finite(const RowMatrix& m, std::size_t layer, const char* what) {
  if (!m.allFinite())
    throw OverflowError(layer, std::string("non-finite value in ") + what + " of coupling layer " +
                                   std::to_string(layer));
}

// Plain evaluation of a conditioner; optionally propagates tangents dp.
RowMatrix eval_net(const std::vector<ad::Parameter>& params, const ResidualNet& net,
                   const RowMatrix& p, const RowMatrix* dp, RowMatrix* dout) {
  auto W = [&](std::size_t i) { return params[i].value.matrix(); };
  auto b = [&](std::size_t i) { return params[i].value.matrix().row(0); };

  RowMatrix h = p * W(net.w_in);
  h.rowwise() += b(net.b_in);
  RowMatrix dh;
  if (dp) dh = (*dp) * W(net.w_in);
  for (const auto& blk : net.blocks) {
    RowMatrix a1 = h.cwiseMax(0.0);
    RowMatrix u = a1 * W(blk.w1);
    u.rowwise() += b(blk.b1);
    RowMatrix a2 = u.cwiseMax(0.0);
    RowMatrix v = a2 * W(blk.w2);
    v.rowwise() += b(blk.b2);
    if (dp) {
      RowMatrix m1 = (h.array() > 0.0).cast<double>();
      RowMatrix du = m1.cwiseProduct(dh) * W(blk.w1);
      RowMatrix m2 = (u.array() > 0.0).cast<double>();
      dh += m2.cwiseProduct(du) * W(blk.w2);
    }
    h += v;
  }
  RowMatrix out = h * W(net.w_out);
  out.rowwise() += b(net.b_out);
  if (dp) *dout = dh * W(net.w_out);
  return out;
}

RowMatrix take_cols(const RowMatrix& m, const std::vector<std::size_t>& cols) {
  RowMatrix out(m.rows(), Eigen::Index(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(Eigen::Index(j)) = m.col(Eigen::Index(cols[j]));
  return out;
}

void put_cols(RowMatrix& m, const std::vector<std::size_t>& cols, const RowMatrix& src) {
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(Eigen::Index(cols[j])) = src.col(Eigen::Index(j));
}

}  // namespace

Flow::Flow(const FlowConfig& config, std::uint64_t seed) {
  std::vector<std::vector<bool>> masks;
  for (std::size_t l = 0; l < config.layers; ++l) masks.push_back(coupling_mask(config.dim, l));
  Rng rng(seed, 0xF10F);
  init(config, masks, rng);
}

void Flow::init(const FlowConfig& config, const std::vector<std::vector<bool>>& masks, Rng& rng) {
  require(config.dim >= 2, ErrorKind::invalid_argument, "coupling flows need dim >= 2");
  require(config.layers >= 1 && config.hidden >= 1, ErrorKind::invalid_argument,
          "flow needs at least one layer and one hidden unit");
  require(config.s_max > 0.0, ErrorKind::invalid_argument, "s_max must be positive");
  require(masks.size() == config.layers, ErrorKind::schema, "mask count does not match layer count");
  config_ = config;
  layers_.clear();
  params_.clear();
  // Parameter addresses must stay stable once graphs reference them.
  params_.reserve(config.layers * 2 * (4 + 4 * config.blocks));

  for (std::size_t l = 0; l < config.layers; ++l) {
    CouplingLayer layer;
    layer.mask = masks[l];
    require(layer.mask.size() == config.dim, ErrorKind::dimension_mismatch,
            "mask length does not match flow dimension");
    for (std::size_t i = 0; i < config.dim; ++i)
      (layer.mask[i] ? layer.pass : layer.transform).push_back(i);
    require(!layer.pass.empty() && !layer.transform.empty(), ErrorKind::schema,
            "coupling mask needs at least one pass-through and one transformed coordinate");
    layer.permutation.assign(config.dim, 0);
    std::size_t k = 0;
    for (std::size_t i : layer.pass) layer.permutation[i] = k++;
    for (std::size_t i : layer.transform) layer.permutation[i] = k++;

    const std::string prefix = "layer" + std::to_string(l);
    layer.scale = make_net(prefix + ".scale", layer.pass.size(), layer.transform.size(), rng);
    layer.shift = make_net(prefix + ".shift", layer.pass.size(), layer.transform.size(), rng);
    layers_.push_back(std::move(layer));
  }
}

std::size_t Flow::add_param(std::string name, Tensor value) {
  params_.emplace_back(std::move(name), std::move(value));
  return params_.size() - 1;
}

ResidualNet Flow::make_net(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  const std::size_t h = config_.hidden;
  const double in_bound = 1.0 / std::sqrt(double(in));
  const double h_bound = 1.0 / std::sqrt(double(h));
  ResidualNet net;
  net.w_in = add_param(prefix + ".in.weight", uniform_tensor(in, h, in_bound, rng));
  net.b_in = add_param(prefix + ".in.bias", uniform_tensor(1, h, in_bound, rng));
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::string p = prefix + ".block" + std::to_string(b);
    ResidualNet::Block blk;
    blk.w1 = add_param(p + ".linear1.weight", uniform_tensor(h, h, h_bound, rng));
    blk.b1 = add_param(p + ".linear1.bias", uniform_tensor(1, h, h_bound, rng));
    blk.w2 = add_param(p + ".linear2.weight", uniform_tensor(h, h, h_bound, rng));
    blk.b2 = add_param(p + ".linear2.bias", uniform_tensor(1, h, h_bound, rng));
    net.blocks.push_back(blk);
  }
  net.w_out = add_param(prefix + ".out.weight", Tensor(h, out));
  net.b_out = add_param(prefix + ".out.bias", Tensor(1, out));
  return net;
}

ad::Parameter& Flow::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  fail(ErrorKind::invalid_argument, "unknown flow parameter '" + name + "'");
}

const ad::Parameter& Flow::parameter(const std::string& name) const {
  return const_cast<Flow*>(this)->parameter(name);
}

FlowBatchResult Flow::forward_batch(const RowMatrix& x) const {
  require(std::size_t(x.cols()) == config_.dim, ErrorKind::dimension_mismatch,
          "flow forward: expected " + std::to_string(config_.dim) + " columns, got " +
              std::to_string(x.cols()));
  FlowBatchResult res{x, Vector::Zero(x.rows())};
  const double smax = config_.s_max;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const CouplingLayer& layer = layers_[l];
    const RowMatrix p = take_cols(res.y, layer.pass);
    const RowMatrix raw = eval_net(params_, layer.scale, p, nullptr, nullptr);
    const RowMatrix s = (raw.array() / smax).tanh() * smax;
    const RowMatrix t = eval_net(params_, layer.shift, p, nullptr, nullptr);
    const RowMatrix yt = take_cols(res.y, layer.transform).cwiseProduct(s.array().exp().matrix()) + t;
    check_finite(yt, l, "forward");
    put_cols(res.y, layer.transform, yt);
    res.logdet += s.rowwise().sum();
  }
  return res;
}

RowMatrix Flow::inverse_batch(const RowMatrix& y) const {
  require(std::size_t(y.cols()) == config_.dim, ErrorKind::dimension_mismatch,
          "flow inverse: expected " + std::to_string(config_.dim) + " columns, got " +
              std::to_string(y.cols()));
  RowMatrix x = y;
  const double smax = config_.s_max;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const CouplingLayer& layer = layers_[l];
    const RowMatrix p = take_cols(x, layer.pass);
    const RowMatrix raw = eval_net(params_, layer.scale, p, nullptr, nullptr);
    const RowMatrix s = (raw.array() / smax).tanh() * smax;
    const RowMatrix t = eval_net(params_, layer.shift, p, nullptr, nullptr);
    const RowMatrix xt = (take_cols(x, layer.transform) - t).cwiseProduct((-s).array().exp().matrix());
    check_finite(xt, l, "inverse");
    put_cols(x, layer.transform, xt);
  }
  return x;
}

RowMatrix Flow::jvp_batch(const RowMatrix& x, const RowMatrix& v) const {
  require(std::size_t(x.cols()) == config_.dim && x.rows() == v.rows() && x.cols() == v.cols(),
          ErrorKind::dimension_mismatch, "flow jvp: point and tangent shapes differ");
  RowMatrix y = x;
  RowMatrix dy = v;
  const double smax = config_.s_max;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const CouplingLayer& layer = layers_[l];
    const RowMatrix p = take_cols(y, layer.pass);
    const RowMatrix dp = take_cols(dy, layer.pass);
    RowMatrix draw, dt;
    const RowMatrix raw = eval_net(params_, layer.scale, p, &dp, &draw);
    const RowMatrix t = eval_net(params_, layer.shift, p, &dp, &dt);
    const RowMatrix c = (raw.array() / smax).tanh();
    const RowMatrix s = c * smax;
    const RowMatrix ds = draw.cwiseProduct((1.0 - c.array().square()).matrix());
    const RowMatrix es = s.array().exp();
    const RowMatrix xt = take_cols(y, layer.transform);
    const RowMatrix dxt = take_cols(dy, layer.transform);
    const RowMatrix yt = xt.cwiseProduct(es) + t;
    const RowMatrix dyt = dxt.cwiseProduct(es) + xt.cwiseProduct(es).cwiseProduct(ds) + dt;
    check_finite(yt, l, "forward");
    check_finite(dyt, l, "jvp");
    put_cols(y, layer.transform, yt);
    put_cols(dy, layer.transform, dyt);
  }
  return dy;
}

Vector Flow::forward(const Vector& x) const {
  return forward_batch(x.transpose()).y.row(0).transpose();
}

Vector Flow::inverse(const Vector& y) const {
  return inverse_batch(y.transpose()).row(0).transpose();
}

double Flow::logdet(const Vector& x) const { return forward_batch(x.transpose()).logdet[0]; }

Vector Flow::jvp(const Vector& x, const Vector& v) const {
  return jvp_batch(x.transpose(), v.transpose()).row(0).transpose();
}

Matrix Flow::jacobian(const Vector& x) const {
  const auto d = Eigen::Index(config_.dim);
  require(x.size() == d, ErrorKind::dimension_mismatch, "flow jacobian: dimension mismatch");
  const RowMatrix xs = x.transpose().replicate(d, 1);
  const RowMatrix vs = RowMatrix::Identity(d, d);
  // Row i of the batched JVP is J e_i, i.e. column i of J.
  return jvp_batch(xs, vs).transpose();
}

namespace {

struct NetNodes {
  NodeId out;
  NodeId dout;
};

// Records a conditioner on primal rows `p` (B rows) and, when `dp` is set,
// on k stacked tangent blocks (k B rows).
NetNodes record_net(Graph& g, std::vector<ad::Parameter>& params, const ResidualNet& net, NodeId p,
                    const NodeId* dp, std::size_t k) {
  auto P = [&](std::size_t i) { return g.parameter(params[i]); };
  NodeId w_in = P(net.w_in);
  NodeId h = g.add(g.matmul(p, w_in), P(net.b_in));
  NodeId dh{};
  if (dp) dh = g.matmul(*dp, w_in);
  for (const auto& blk : net.blocks) {
    NodeId w1 = P(blk.w1);
    NodeId w2 = P(blk.w2);
    NodeId u = g.add(g.matmul(g.relu(h), w1), P(blk.b1));
    NodeId v = g.add(g.matmul(g.relu(u), w2), P(blk.b2));
    if (dp) {
      NodeId du = g.matmul(g.mul(dh, g.tile_rows(g.relu_mask(h), k)), w1);
      dh = g.add(dh, g.matmul(g.mul(du, g.tile_rows(g.relu_mask(u), k)), w2));
    }
    h = g.add(h, v);
  }
  NodeId w_out = P(net.w_out);
  NetNodes res;
  res.out = g.add(g.matmul(h, w_out), P(net.b_out));
  if (dp) res.dout = g.matmul(dh, w_out);
  return res;
}

}  // namespace

FlowGraphOutput Flow::record(Graph& g, const RowMatrix& x, const std::optional<RowMatrix>& tangents) {
  require(std::size_t(x.cols()) == config_.dim, ErrorKind::dimension_mismatch,
          "flow record: expected " + std::to_string(config_.dim) + " columns");
  const std::size_t batch = std::size_t(x.rows());
  std::size_t k = 0;
  if (tangents) {
    require(tangents->cols() == x.cols() && batch > 0 && tangents->rows() % x.rows() == 0,
            ErrorKind::shape_mismatch, "flow record: tangents must be (k B) x d");
    k = std::size_t(tangents->rows()) / batch;
  }

  const double smax = config_.s_max;
  NodeId y = g.constant(Tensor::from_matrix(x));
  NodeId dy{};
  if (tangents) dy = g.constant(Tensor::from_matrix(*tangents));
  NodeId logdet{};
  bool have_logdet = false;
  const NodeId one = g.constant(Tensor::scalar(1.0));

  for (const CouplingLayer& layer : layers_) {
    NodeId p = g.slice_cols(y, layer.pass);
    NodeId xt = g.slice_cols(y, layer.transform);
    NodeId dp{}, dxt{};
    if (tangents) {
      dp = g.slice_cols(dy, layer.pass);
      dxt = g.slice_cols(dy, layer.transform);
    }
    NetNodes sn = record_net(g, params_, layer.scale, p, tangents ? &dp : nullptr, k);
    NetNodes tn = record_net(g, params_, layer.shift, p, tangents ? &dp : nullptr, k);

    NodeId c = g.tanh(g.scale(sn.out, 1.0 / smax));
    NodeId s = g.scale(c, smax);
    NodeId es = g.exp(s);
    NodeId xes = g.mul(xt, es);
    NodeId yt = g.add(xes, tn.out);

    const NodeId ls = g.sum_rows(s);
    logdet = have_logdet ? g.add(logdet, ls) : ls;
    have_logdet = true;

    const NodeId py[2] = {p, yt};
    y = g.slice_cols(g.concat_cols(py), layer.permutation);

    if (tangents) {
      // d(s_max tanh(raw / s_max)) = (1 - tanh^2) d raw
      NodeId dclamp = g.add(g.scale(g.square(c), -1.0), one);
      NodeId ds = g.mul(sn.dout, g.tile_rows(dclamp, k));
      NodeId dyt = g.add(g.add(g.mul(dxt, g.tile_rows(es, k)), g.mul(g.tile_rows(xes, k), ds)), tn.dout);
      const NodeId pd[2] = {dp, dyt};
      dy = g.slice_cols(g.concat_cols(pd), layer.permutation);
    }
  }

  FlowGraphOutput out;
  out.y = y;
  out.logdet = logdet;
  if (tangents) {
    out.tangents = dy;
    out.has_tangents = true;
  }
  return out;
}

Flow FlowBuilder::build(const FlowConfig& config, const std::vector<std::vector<bool>>& masks,
                        const std::vector<std::pair<std::string, ad::Tensor>>& params) {
  Flow flow;
  Rng rng(0);
  flow.init(config, masks, rng);
  require(params.size() == flow.params_.size(), ErrorKind::schema,
          "model has " + std::to_string(params.size()) + " parameter tensors, expected " +
              std::to_string(flow.params_.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = flow.params_[i];
    require(params[i].first == p.name, ErrorKind::schema,
            "parameter '" + params[i].first + "' found where '" + p.name + "' was expected");
    require(params[i].second.same_shape(p.value), ErrorKind::schema,
            "parameter '" + p.name + "' has shape " + params[i].second.shape_string() +
                ", expected " + p.value.shape_string());
    p.value = params[i].second;
    p.grad = Tensor(p.value.rows(), p.value.cols());
  }
  return flow;
}

}  // namespace pullback
