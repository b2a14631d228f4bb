#include "pullback/training.hpp"

#include "pullback/error.hpp"
#include "pullback/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace pullback {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::ours: return "ours";
    case Variant::standard_nf: return "standard_nf";
    case Variant::anisotropic_nf: return "anisotropic_nf";
    case Variant::isometric_nf: return "isometric_nf";
  }
  return "unknown";
}

Variant parse_variant(const std::string& text) {
  for (Variant v : kAllVariants)
    if (text == to_string(v)) return v;
  fail(ErrorKind::invalid_argument,
       "unknown variant '" + text + "' (expected ours, standard_nf, anisotropic_nf, isometric_nf)");
}

// ---------------------------------------------------------------------------
// Configuration

TrainConfig TrainConfig::defaults_for(const std::string& dataset) {
  TrainConfig c;
  c.dataset = dataset;
  struct Row {
    const char* name;
    std::size_t steps, epochs, batch;
    double iso, vol, lr;
  };
  // Sizes for the RAE experiments; the 2-D manifold-mapping sets share one row.
  static const Row kRows[] = {
      {"sinusoid_1_3", 8, 1000, 64, 1.0, 1.0, 3e-4},
      {"sinusoid_2_3", 8, 1000, 64, 1.0, 1.0, 3e-4},
      {"sinusoid_5_20", 24, 2000, 128, 1.2, 2.5, 4e-4},
      {"hemisphere_2_3", 8, 2000, 64, 1.0, 1.0, 4e-4},
      {"hemisphere_5_20", 12, 2000, 64, 0.75, 1.2, 4e-4},
      {"banana", 4, 200, 64, 1.0, 1.0, 1e-3},
      {"squeezed_banana", 4, 200, 64, 1.0, 1.0, 1e-3},
      {"river", 4, 200, 64, 1.0, 1.0, 1e-3},
  };
  for (const Row& r : kRows) {
    if (dataset != r.name) continue;
    c.flow_steps = r.steps;
    c.epochs = r.epochs;
    c.batch_size = r.batch;
    c.lambda_iso = r.iso;
    c.lambda_vol = r.vol;
    c.learning_rate = r.lr;
  }
  return c;
}

double TrainConfig::effective_lambda_iso() const {
  return variant == Variant::ours || variant == Variant::isometric_nf ? lambda_iso : 0.0;
}

double TrainConfig::effective_lambda_vol() const {
  return variant == Variant::ours || variant == Variant::isometric_nf ? lambda_vol : 0.0;
}

bool TrainConfig::variances_trainable() const {
  return variant == Variant::ours || variant == Variant::anisotropic_nf;
}

FlowConfig TrainConfig::flow_config(std::size_t dim) const {
  FlowConfig f;
  f.dim = dim;
  f.layers = flow_steps;
  f.hidden = hidden;
  f.blocks = blocks;
  f.s_max = s_max;
  return f;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  require(end != v.c_str() && *end == '\0', ErrorKind::schema, "config '" + key + "': bad number '" + v + "'");
  return x;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  require(end != v.c_str() && *end == '\0' && v[0] != '-', ErrorKind::schema,
          "config '" + key + "': bad non-negative integer '" + v + "'");
  return std::size_t(x);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::apply(const std::string& key, const std::string& value) {
  if (key == "variant") variant = parse_variant(value);
  else if (key == "dataset") dataset = value;
  else if (key == "flow_steps") flow_steps = to_size(key, value);
  else if (key == "hidden") hidden = to_size(key, value);
  else if (key == "blocks") blocks = to_size(key, value);
  else if (key == "s_max") s_max = to_double(key, value);
  else if (key == "epochs") epochs = to_size(key, value);
  else if (key == "batch_size") batch_size = to_size(key, value);
  else if (key == "lambda_iso") lambda_iso = to_double(key, value);
  else if (key == "lambda_vol") lambda_vol = to_double(key, value);
  else if (key == "learning_rate") learning_rate = to_double(key, value);
  else if (key == "warmup_steps") warmup_steps = to_size(key, value);
  else if (key == "beta1") beta1 = to_double(key, value);
  else if (key == "beta2") beta2 = to_double(key, value);
  else if (key == "adam_eps") adam_eps = to_double(key, value);
  else if (key == "weight_decay") weight_decay = to_double(key, value);
  else if (key == "clip_norm") clip_norm = to_double(key, value);
  else if (key == "seed") seed = to_size(key, value);
  else fail(ErrorKind::schema, "unknown training config key '" + key + "'");
}

void TrainConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::schema,
            "config line " + std::to_string(lineno) + ": expected 'key = value'");
    apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"variant", to_string(variant)},
      {"dataset", dataset},
      {"flow_steps", std::to_string(flow_steps)},
      {"hidden", std::to_string(hidden)},
      {"blocks", std::to_string(blocks)},
      {"s_max", fmt(s_max)},
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"lambda_iso", fmt(lambda_iso)},
      {"lambda_vol", fmt(lambda_vol)},
      {"learning_rate", fmt(learning_rate)},
      {"warmup_steps", std::to_string(warmup_steps)},
      {"beta1", fmt(beta1)},
      {"beta2", fmt(beta2)},
      {"adam_eps", fmt(adam_eps)},
      {"weight_decay", fmt(weight_decay)},
      {"clip_norm", fmt(clip_norm)},
      {"seed", std::to_string(seed)},
  };
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

TrainConfig load_train_config(const std::string& path, const std::string& dataset_hint) {
  std::ifstream in(path);
  require(bool(in), ErrorKind::io, "cannot open training config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  // A dataset key in the file selects the defaults the remaining keys override.
  std::string dataset = dataset_hint;
  {
    TrainConfig probe;
    probe.apply_text(text);
    if (!probe.dataset.empty()) dataset = probe.dataset;
  }
  TrainConfig cfg = TrainConfig::defaults_for(dataset);
  cfg.apply_text(text);
  return cfg;
}

// ---------------------------------------------------------------------------
// Optimiser

double learning_rate_at(std::size_t step, std::size_t total, std::size_t warmup, double base) {
  if (step < warmup) return base * double(step + 1) / double(warmup);
  if (total <= warmup) return base;
  const double progress = std::min(1.0, double(step - warmup + 1) / double(total - warmup));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Adam::Adam(std::vector<ad::Parameter*> params, double beta1, double beta2, double eps, double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
  for (ad::Parameter* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Parameter& p = *params_[k];
    if (!p.trainable) continue;
    const double wd = p.decay ? weight_decay_ : 0.0;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + wd * p.value[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

double clip_grad_norm(std::span<ad::Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const ad::Parameter* p : params)
    if (p->trainable)
      for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / (norm + 1e-6);
    for (ad::Parameter* p : params)
      if (p->trainable)
        for (double& g : p->grad.data()) g *= s;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Model and losses

DensityModel::DensityModel(const FlowConfig& config, std::uint64_t seed)
    : flow(config, seed), log_variances("log_variances", Tensor(1, config.dim, 0.0)) {
  log_variances.decay = false;
}

DensityModel::DensityModel(TrainedModel model)
    : flow(std::move(model.flow)), log_variances("log_variances", Tensor(1, flow.dim(), 0.0)) {
  const Vector a = model.potential.log_variances();
  for (std::size_t i = 0; i < flow.dim(); ++i) log_variances.value[i] = a[Eigen::Index(i)];
  log_variances.decay = false;
}

DiagonalQuadratic DensityModel::potential() const {
  Vector a(Eigen::Index(flow.dim()));
  for (std::size_t i = 0; i < flow.dim(); ++i) a[Eigen::Index(i)] = log_variances.value[i];
  return DiagonalQuadratic::from_log_variances(a);
}

std::vector<ad::Parameter*> DensityModel::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& p : flow.parameters()) out.push_back(&p);
  out.push_back(&log_variances);
  return out;
}

namespace {

RowMatrix identity_directions(std::size_t dim, std::size_t batch) {
  RowMatrix t = RowMatrix::Zero(Eigen::Index(dim * batch), Eigen::Index(dim));
  for (std::size_t i = 0; i < dim; ++i)
    t.block(Eigen::Index(i * batch), Eigen::Index(i), Eigen::Index(batch), 1).setOnes();
  return t;
}

NodeId nll_from(Graph& g, DensityModel& model, const FlowGraphOutput& out, std::size_t batch) {
  const std::size_t d = model.flow.dim();
  NodeId a = g.parameter(model.log_variances);
  NodeId inv_var = g.exp(g.scale(a, -1.0));
  NodeId quad = g.scale(g.sum(g.mul(g.square(out.y), inv_var)), 0.5 / double(batch));
  NodeId logdet = g.mean(out.logdet);
  NodeId norm = g.scale(g.sum(a), 0.5);
  NodeId c = g.constant(Tensor::scalar(0.5 * double(d) * std::log(2.0 * std::numbers::pi)));
  return g.add(g.add(g.sub(quad, logdet), norm), c);
}

}  // namespace

NodeId nll(Graph& g, DensityModel& model, const RowMatrix& batch) {
  require(batch.rows() > 0, ErrorKind::invalid_argument, "nll of an empty batch");
  const FlowGraphOutput out = model.flow.record(g, batch);
  return nll_from(g, model, out, std::size_t(batch.rows()));
}

NodeId volume_penalty(Graph& g, DensityModel& model, const RowMatrix& batch) {
  require(batch.rows() > 0, ErrorKind::invalid_argument, "volume penalty of an empty batch");
  const FlowGraphOutput out = model.flow.record(g, batch);
  return g.mean(g.square(out.logdet));
}

NodeId isometry_penalty_from_columns(Graph& g, NodeId columns, std::size_t dim) {
  const Tensor& cols = g.value(columns);
  require(dim > 0 && cols.cols() == dim && cols.rows() % dim == 0, ErrorKind::shape_mismatch,
          "isometry penalty: columns must be (d B) x d");
  const std::size_t batch = cols.rows() / dim;
  Tensor eye(1, dim * dim);
  for (std::size_t i = 0; i < dim; ++i) eye[i * dim + i] = 1.0;
  NodeId gram = g.gram(columns, dim);
  NodeId diff = g.sub(gram, g.constant(std::move(eye)));
  return g.scale(g.sum(g.square(diff)), 1.0 / double(batch));
}

NodeId isometry_penalty(Graph& g, DensityModel& model, const RowMatrix& batch) {
  require(batch.rows() > 0, ErrorKind::invalid_argument, "isometry penalty of an empty batch");
  const std::size_t d = model.flow.dim();
  const FlowGraphOutput out =
      model.flow.record(g, batch, identity_directions(d, std::size_t(batch.rows())));
  return isometry_penalty_from_columns(g, out.tangents, d);
}

LossNodes record_loss(Graph& g, DensityModel& model, const RowMatrix& batch, double lambda_vol,
                      double lambda_iso) {
  require(batch.rows() > 0, ErrorKind::invalid_argument, "loss of an empty batch");
  const std::size_t d = model.flow.dim();
  const std::size_t b = std::size_t(batch.rows());
  LossNodes loss;
  loss.has_iso = lambda_iso != 0.0;
  const FlowGraphOutput out = loss.has_iso ? model.flow.record(g, batch, identity_directions(d, b))
                                           : model.flow.record(g, batch);
  loss.nll = nll_from(g, model, out, b);
  loss.vol = g.mean(g.square(out.logdet));
  loss.total = loss.nll;
  if (lambda_vol != 0.0) loss.total = g.add(loss.total, g.scale(loss.vol, lambda_vol));
  if (loss.has_iso) {
    loss.iso = isometry_penalty_from_columns(g, out.tangents, d);
    loss.total = g.add(loss.total, g.scale(loss.iso, lambda_iso));
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(const RowMatrix& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  require(data.cols() >= 2, ErrorKind::invalid_argument, "training data needs at least 2 columns");
  return train(DensityModel(config.flow_config(std::size_t(data.cols())), config.seed), data, config,
               on_epoch);
}

TrainResult train(DensityModel model, const RowMatrix& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  const std::size_t n = std::size_t(data.rows());
  const std::size_t d = std::size_t(data.cols());
  require(n > 0, ErrorKind::invalid_argument, "training data is empty");
  require(d == model.flow.dim(), ErrorKind::dimension_mismatch,
          "training data has dimension " + std::to_string(d) + ", model has " +
              std::to_string(model.flow.dim()));
  require(config.batch_size > 0, ErrorKind::invalid_argument, "batch size must be positive");
  require(data.allFinite(), ErrorKind::numeric, "training data contains non-finite values");

  const double lambda_iso = config.effective_lambda_iso();
  const double lambda_vol = config.effective_lambda_vol();
  model.log_variances.trainable = config.variances_trainable();
  if (!model.log_variances.trainable) model.log_variances.value.fill(0.0);

  const std::vector<ad::Parameter*> params = model.parameters();
  Adam adam(params, config.beta1, config.beta2, config.adam_eps, config.weight_decay);

  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * per_epoch;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Rng root(config.seed, 0x7A);

  TrainResult result{TrainedModel{model.flow, model.potential(), to_string(config.variant), config.dataset}, {}};
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = root.substream(epoch);
    rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(n, lo + config.batch_size);
      RowMatrix batch(Eigen::Index(hi - lo), Eigen::Index(d));
      for (std::size_t i = lo; i < hi; ++i) batch.row(Eigen::Index(i - lo)) = data.row(Eigen::Index(order[i]));

      for (ad::Parameter* p : params) p->zero_grad();
      Graph g;
      LossNodes loss;
      try {
        loss = record_loss(g, model, batch, lambda_vol, lambda_iso);
      } catch (const OverflowError& e) {
        fail(ErrorKind::numeric, "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1) +
                                     ": " + e.what());
      }
      const double total = g.value(loss.total).item();
      if (!std::isfinite(total))
        fail(ErrorKind::numeric, "non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                     std::to_string(b + 1));
      g.backward(loss.total);
      clip_grad_norm(params, config.clip_norm);
      const double lr = learning_rate_at(step, total_steps, config.warmup_steps, config.learning_rate);
      adam.step(lr);
      ++step;

      const double w = double(hi - lo) / double(n);
      rec.nll += w * g.value(loss.nll).item();
      rec.vol += w * g.value(loss.vol).item();
      if (loss.has_iso) rec.iso += w * g.value(loss.iso).item();
      rec.total += w * total;
      rec.lr = lr;
    }
    for (const ad::Parameter* p : params)
      if (!p->value.all_finite())
        fail(ErrorKind::numeric, "non-finite parameter '" + p->name + "' after epoch " + std::to_string(epoch + 1));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  result.model.flow = model.flow;
  result.model.potential = model.potential();
  return result;
}

void save_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path);
  require(bool(out), ErrorKind::io, "cannot open '" + path + "' for writing");
  out << "epoch,nll,vol,iso,total,lr\n";
  for (const auto& r : history)
    out << r.epoch << "," << fmt(r.nll) << "," << fmt(r.vol) << "," << fmt(r.iso) << "," << fmt(r.total)
        << "," << fmt(r.lr) << "\n";
  require(bool(out), ErrorKind::io, "failed writing '" + path + "'");
}

}  // namespace pullback
