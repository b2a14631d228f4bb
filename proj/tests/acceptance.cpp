// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any gating criterion fails. PULLBACK_ACCEPT_ONLY=1,4,7
// restricts the run; PULLBACK_ACCEPT_EXTENDED=1 adds the large non-gating runs.

#include "pullback/datagen.hpp"
#include "pullback/eval.hpp"
#include "pullback/geometry.hpp"
#include "pullback/graph.hpp"
#include "pullback/rae.hpp"
#include "pullback/rng.hpp"
#include "pullback/training.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace pullback;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  int id;
  bool gating;
  bool pass;
  std::string detail;
};

std::vector<Outcome> outcomes;

void report(int id, bool pass, const std::string& detail, bool gating = true) {
  outcomes.push_back({id, gating, pass, detail});
  std::printf("criterion %d: %s%s %s\n", id, pass ? "PASS" : "FAIL", gating ? "" : " (non-gating)", detail.c_str());
  std::fflush(stdout);
}

void info(int id, const std::string& detail) {
  std::printf("criterion %d: INFO %s\n", id, detail.c_str());
  std::fflush(stdout);
}

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector random_vector(std::size_t d, Rng& rng, double scale = 1.0) {
  Vector v{Eigen::Index(d)};
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
  return v;
}

ad::Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  ad::Tensor t(r, c);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

Flow random_flow(std::size_t dim, std::size_t layers, std::size_t hidden, std::uint64_t seed, double scale) {
  FlowConfig c;
  c.dim = dim;
  c.layers = layers;
  c.hidden = hidden;
  Flow f(c, seed);
  Rng rng(seed, 99);
  for (auto& p : f.parameters())
    if (p.name.find(".out.") != std::string::npos)
      for (double& v : p.value.data()) v = scale * rng.normal();
  return f;
}

Matrix numeric_jacobian(const Flow& f, const Vector& x, double h) {
  const Eigen::Index d = x.size();
  Matrix j(d, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    Vector xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    j.col(c) = (f.forward(xp) - f.forward(xm)) / (2 * h);
  }
  return j;
}

// Independent scan: smallest d' in [1, d-1] with discarded sorted tail <= eps * total, else d.
std::size_t brute_force_dimension(const Vector& lambda, double eps) {
  std::vector<double> v(lambda.data(), lambda.data() + lambda.size());
  std::sort(v.begin(), v.end(), std::greater<>());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  for (std::size_t k = 1; k < v.size(); ++k) {
    double tail = 0.0;
    for (std::size_t i = k; i < v.size(); ++i) tail += v[i];
    if (tail <= eps * total) return k;
  }
  return v.size();
}

TrainedModel train_on(const RowMatrix& data, TrainConfig cfg, Variant variant, std::uint64_t seed) {
  cfg.variant = variant;
  cfg.seed = seed;
  return train(data, cfg).model;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = Clock::now();
  double mlp_err = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(100 + s);
    const ad::Tensor x = random_tensor(16, 3, rng), y = random_tensor(16, 2, rng);
    ad::Parameter w1("w1", random_tensor(3, 8, rng, 0.5)), b1("b1", random_tensor(1, 8, rng, 0.1));
    ad::Parameter w2("w2", random_tensor(8, 8, rng, 0.5)), b2("b2", random_tensor(1, 8, rng, 0.1));
    ad::Parameter w3("w3", random_tensor(8, 2, rng, 0.5)), b3("b3", random_tensor(1, 2, rng, 0.1));
    ad::Parameter* ps[] = {&w1, &b1, &w2, &b2, &w3, &b3};
    const auto loss = [&](ad::Graph& g) {
      ad::NodeId h = g.relu(g.add(g.matmul(g.constant(x), g.parameter(w1)), g.parameter(b1)));
      h = g.tanh(g.add(g.matmul(h, g.parameter(w2)), g.parameter(b2)));
      const ad::NodeId out = g.add(g.matmul(h, g.parameter(w3)), g.parameter(b3));
      return g.mean(g.square(g.sub(out, g.constant(y))));
    };
    mlp_err = std::max(mlp_err, ad::grad_check(loss, ps, 1e-5));
  }

  FlowConfig c;
  c.dim = 2;
  c.layers = 2;
  c.hidden = 8;
  DensityModel m(c, 3);
  Rng rr(3, 99);
  for (auto& p : m.flow.parameters())
    if (p.name.find(".out.") != std::string::npos)
      for (double& v : p.value.data()) v = 0.03 * rr.normal();
  m.log_variances.value[0] = 0.3;
  m.log_variances.value[1] = -0.2;
  Rng rng(4);
  RowMatrix x(6, 2);
  for (Eigen::Index r = 0; r < 6; ++r) x.row(r) = random_vector(2, rng).transpose();
  const auto params = m.parameters();
  const double loss_err =
      ad::grad_check([&](ad::Graph& g) { return record_loss(g, m, x, 1.0, 1.0).total; }, params, 1e-6);
  const double t = seconds_since(t0);
  report(1, mlp_err <= 1e-4 && loss_err <= 1e-4 && t < 10.0,
         format("mlp max rel err %.2e, full loss (with isometry) %.2e, %.2fs", mlp_err, loss_err, t));
}

void criterion2() {
  double round_trip = 0.0, logdet = 0.0;
  std::size_t n = 0;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const std::size_t dim = 2 + s;
    const Flow f = random_flow(dim, 8, 64, 20 + s, 0.01);
    Rng rng(30 + s);
    for (int i = 0; i < 5000; ++i, ++n) {
      const Vector x = random_vector(dim, rng, 2.0);
      round_trip = std::max(round_trip, (f.inverse(f.forward(x)) - x).cwiseAbs().maxCoeff());
      if (i < 1000) {
        const double numeric = std::log(std::abs(numeric_jacobian(f, x, 1e-7).determinant()));
        logdet = std::max(logdet, std::abs(f.logdet(x) - numeric));
      }
    }
  }
  report(2, round_trip <= 1e-9 && logdet <= 1e-6,
         format("%zu round trips max inf-norm %.2e; log-det vs numeric Jacobian max gap %.2e", n, round_trip, logdet));
}

void criterion3() {
  const PullbackManifold m(std::make_shared<GroundTruthDiffeo>(GroundTruthDiffeo::banana()),
                           std::make_shared<DiagonalQuadratic>(Vector{{0.25, 4.0}}));
  const Vector a{{0.0, -3.0}}, b{{0.0, 3.0}}, mid{{-1.0, 0.0}};
  const double g = (m.geodesic(a, b, 0.5) - mid).cwiseAbs().maxCoeff();
  const double d = std::abs(m.distance(a, b) - 1.5);
  const Vector pts[] = {a, b};
  const double c = (m.barycentre(pts) - mid).cwiseAbs().maxCoeff();
  report(3, g <= 1e-10 && d <= 1e-10 && c <= 1e-10,
         format("geodesic midpoint err %.1e, distance err %.1e, barycentre err %.1e", g, d, c));
}

void criterion4() {
  const Dataset data = generate_dataset("banana", 2000, 41);
  TrainConfig cfg = TrainConfig::defaults_for("banana");
  cfg.epochs = 50;
  const TrainedModel model = train_on(data.samples, cfg, Variant::ours, 41);
  const PullbackManifold m = manifold_of(model);
  const PairSet pairs = sample_pairs(data.samples, 1000, 42);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vector x = pairs.from.row(Eigen::Index(i)).transpose(), y = pairs.to.row(Eigen::Index(i)).transpose();
    worst = std::max(worst, (m.exp_map(x, m.log_map(x, y)) - y).norm());
  }
  report(4, worst <= 1e-6, format("1000 data pairs, max ||exp_x(log_x y) - y|| = %.2e", worst));
}

void criterion5() {
  Rng rng(55);
  std::size_t agree = 0;
  const std::size_t trials = 10000;
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t d = 1 + std::size_t(rng.uniform() * 12);
    Vector lambda{Eigen::Index(d)};
    for (Eigen::Index k = 0; k < lambda.size(); ++k) lambda[k] = std::exp(4.0 * rng.normal());
    // Repeated values exercise ties.
    if (d > 2 && rng.uniform() < 0.2) lambda[1] = lambda[0];
    const double eps = rng.uniform() < 0.1 ? 0.0 : std::pow(10.0, -4.0 * rng.uniform());
    if (select_dimension(lambda, eps) == brute_force_dimension(lambda, eps)) ++agree;
  }
  const auto b = rae_bound_check_identity(Vector{{4.0, 2.0, 1.0, 0.02, 0.01}}, 0.01, 200000, 5);
  const bool within = std::abs(b.empirical - b.expected) <= 5 * b.standard_error;
  report(5, agree == trials && within && b.empirical <= b.bound,
         format("dimension rule %zu/%zu agree; bound check d'=%zu empirical %.5f expected %.5f (se %.1e) bound %.5f",
                agree, trials, b.latent_dim, b.empirical, b.expected, b.standard_error, b.bound));
}

void criterion6() {
  const std::size_t n = 2000;
  Rng rng(66);
  RowMatrix x(Eigen::Index(n), 2);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    x(r, 0) = 2.0 * rng.normal();
    x(r, 1) = rng.normal();
  }
  const TrainConfig cfg = TrainConfig::defaults_for("banana");
  const auto t0 = Clock::now();
  const Vector lam = train_on(x, cfg, Variant::anisotropic_nf, 6).potential.variances();
  const double e0 = std::abs(lam[0] / 4.0 - 1.0), e1 = std::abs(lam[1] - 1.0);
  report(6, e0 <= 0.1 && e1 <= 0.1,
         format("anisotropic_nf learned variances (%.3f, %.3f) vs (4, 1): rel err %.1f%%, %.1f%% (%.0fs)", lam[0],
                lam[1], 100 * e0, 100 * e1, seconds_since(t0)));
  const Vector ours = train_on(x, cfg, Variant::ours, 6).potential.variances();
  info(6, format("ours on the same data learns (%.3f, %.3f)", ours[0], ours[1]));
}

void criterion7() {
  const Dataset data = generate_dataset("banana", 2000, 70);
  const Split split = train_test_split(data.samples, 0.2, 70);
  const TrainConfig cfg = TrainConfig::defaults_for("banana");
  std::vector<TableJob> jobs;
  for (Variant v : kAllVariants)
    for (std::uint64_t s = 0; s < 3; ++s)
      jobs.push_back({"banana", to_string(v), s, [&, v, s] { return train_on(split.train, cfg, v, 70 + s); }, {}});
  EvalConfig ec;
  ec.seed = 70;
  const auto t0 = Clock::now();
  const EvalReport r = run_table(jobs, {{"banana", split.test}}, ec);
  for (const EvalCell& c : r.summary)
    info(7, format("%-15s geodesic %.4f (%.4f)  variation %.4f (%.4f)%s", c.variant.c_str(), c.geodesic.mean,
                   c.geodesic.std, c.variation.mean, c.variation.std, c.ok ? "" : (" failed: " + c.error).c_str()));
  const EvalCell* ours = r.find("banana", "ours");
  const EvalCell* nf = r.find("banana", "standard_nf");
  const bool ok = ours && nf && ours->ok && nf->ok;
  const double o = ok ? ours->geodesic.mean : NAN, s = ok ? nf->geodesic.mean : NAN;
  report(7, ok && o < s && o <= 2 * 0.0315,
         format("ours %.4f vs standard_nf %.4f (3 seeds); bound 2 x 0.0315 = 0.063; %.0fs total", o, s,
                seconds_since(t0)));
}

TrainConfig rae_config(const std::string& key) {
  // Built-in architecture and weights, shorter schedule at a higher rate.
  TrainConfig cfg = TrainConfig::defaults_for(key);
  cfg.epochs = 400;
  cfg.learning_rate = 3e-3;
  cfg.warmup_steps = 200;
  return cfg;
}

std::string variances_string(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += format(i ? ", %.2e" : "%.2e", v[i]);
  return s;
}

std::optional<TrainedModel> hemisphere_model;

void criterion8(bool extended) {
  struct Case {
    const char* name;
    std::size_t intrinsic, ambient;
  };
  bool pass = true;
  std::string detail;
  for (const Case& c : {Case{"hemisphere", 2, 3}, Case{"sinusoid", 1, 3}}) {
    const auto t0 = Clock::now();
    const Dataset d = generate_dataset(c.name, 2000, 80, c.intrinsic, c.ambient);
    const std::string key = format("%s_%zu_%zu", c.name, c.intrinsic, c.ambient);
    const TrainedModel m = train_on(d.samples, rae_config(key), Variant::ours, 80);
    const Vector lam = m.potential.variances();
    const std::size_t de = select_dimension(lam, 0.01);
    info(8, format("%s variances [%s] d_eps %zu (%.0fs)", key.c_str(), variances_string(lam).c_str(), de,
                   seconds_since(t0)));
    pass = pass && de == c.intrinsic;
    detail += format("%s%s d_eps=%zu (d'=%zu)", detail.empty() ? "" : "; ", key.c_str(), de, c.intrinsic);
    if (std::string(c.name) == "hemisphere") {
      hemisphere_model = m;
    }
  }
  report(8, pass, detail);

  if (!extended) {
    info(8, "sinusoid_5_20 extended check skipped, about 35 min (set PULLBACK_ACCEPT_EXTENDED=1)");
    return;
  }
  const auto t0 = Clock::now();
  const Dataset d = generate_dataset("sinusoid", 2000, 81, 5, 20);
  TrainConfig cfg = rae_config("sinusoid_5_20");
  cfg.epochs = 100;
  const Vector lam = train_on(d.samples, cfg, Variant::ours, 81).potential.variances();
  const std::size_t de = select_dimension(lam, 0.01);
  report(8, de >= 5 && de <= 7, format("extended sinusoid_5_20 d_eps=%zu, expected 5..7 (%.0fs)", de, seconds_since(t0)),
         false);
}

struct CurveShape {
  bool decreasing_ok, increasing_ok;
  std::string detail;
};

CurveShape curve_shape(const TrainedModel& m, const RowMatrix& data, std::size_t intrinsic) {
  const std::size_t d = m.flow.dim();
  const auto dec = reconstruction_curve(m.flow, m.potential, data, AxisOrder::decreasing);
  const auto inc = reconstruction_curve(m.flow, m.potential, data, AxisOrder::increasing);
  const double e0 = dec.mean_error[0];
  const bool dec_ok = dec.mean_error[intrinsic] <= 0.1 * e0;
  bool inc_ok = true;
  for (std::size_t k = 0; k <= d - intrinsic; ++k) inc_ok = inc_ok && inc.mean_error[k] >= 0.5 * inc.mean_error[0];
  std::string s = "decreasing [";
  for (double v : dec.mean_error) s += format(" %.3f", v);
  s += " ] increasing [";
  for (double v : inc.mean_error) s += format(" %.3f", v);
  s += " ]";
  return {dec_ok, inc_ok, s};
}

void criterion9(bool extended) {
  if (!hemisphere_model) {
    const Dataset d = generate_dataset("hemisphere", 2000, 80, 2, 3);
    hemisphere_model = train_on(d.samples, rae_config("hemisphere_2_3"), Variant::ours, 80);
  }
  const Dataset d = generate_dataset("hemisphere", 2000, 80, 2, 3);
  const CurveShape c = curve_shape(*hemisphere_model, d.samples, 2);
  report(9, c.decreasing_ok && c.increasing_ok, "hemisphere_2_3 " + c.detail);

  if (!extended) {
    info(9, "hemisphere_5_20 check skipped, about 16 min (set PULLBACK_ACCEPT_EXTENDED=1)");
    return;
  }
  const auto t0 = Clock::now();
  const Dataset h = generate_dataset("hemisphere", 2000, 90, 5, 20);
  TrainConfig cfg = rae_config("hemisphere_5_20");
  cfg.epochs = 100;
  const TrainedModel m = train_on(h.samples, cfg, Variant::ours, 90);
  const CurveShape e = curve_shape(m, h.samples, 5);
  report(9, e.decreasing_ok && e.increasing_ok,
         format("hemisphere_5_20 (%.0fs) ", seconds_since(t0)) + e.detail, false);
}

void criterion10() {
  const auto t0 = Clock::now();
  const std::size_t n = 50000;
  const Dataset d = generate_dataset("banana", n, 10);
  // phi_GT(x) = (x1 - x2^2 / 9, x2) is exactly N(0, diag(1/4, 4)).
  const double var[2] = {0.25, 4.0};
  double mean[2] = {0, 0}, sq[2] = {0, 0};
  for (Eigen::Index r = 0; r < d.samples.rows(); ++r) {
    const double y[2] = {d.samples(r, 0) - d.samples(r, 1) * d.samples(r, 1) / 9.0, d.samples(r, 1)};
    for (int i = 0; i < 2; ++i) {
      mean[i] += y[i];
      sq[i] += y[i] * y[i];
    }
  }
  bool pass = true;
  std::string detail;
  for (int i = 0; i < 2; ++i) {
    mean[i] /= double(n);
    const double v = (sq[i] - double(n) * mean[i] * mean[i]) / double(n - 1);
    const double se = std::sqrt(var[i] / double(n));
    const bool ok = std::abs(mean[i]) <= 5 * se && std::abs(v / var[i] - 1.0) <= 0.1;
    pass = pass && ok;
    detail += format("coord %d mean %.4f (%.1f se) var %.4f vs %.2f; ", i + 1, mean[i], std::abs(mean[i]) / se, v,
                     var[i]);
  }
  report(10, pass, detail + format("n=%zu (%.0fs)", n, seconds_since(t0)));
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* env = std::getenv("PULLBACK_ACCEPT_ONLY")) {
    std::stringstream ss(env);
    std::string tok;
    while (std::getline(ss, tok, ',')) only.insert(std::atoi(tok.c_str()));
  }
  const char* ext = std::getenv("PULLBACK_ACCEPT_EXTENDED");
  const bool extended = ext && std::string(ext) == "1";
  const auto want = [&](int id) { return only.empty() || only.count(id); };

  const std::vector<std::pair<int, std::function<void()>>> all = {
      {1, criterion1},  {2, criterion2},
      {3, criterion3},  {4, criterion4},
      {5, criterion5},  {6, criterion6},
      {7, criterion7},  {8, [&] { criterion8(extended); }},
      {9, [&] { criterion9(extended); }}, {10, criterion10},
  };
  for (const auto& [id, run] : all) {
    if (!want(id)) continue;
    try {
      run();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  }

  int failed = 0;
  std::printf("\nsummary\n");
  for (const Outcome& o : outcomes) {
    std::printf("  %2d %s%s\n", o.id, o.pass ? "PASS" : "FAIL", o.gating ? "" : " (non-gating)");
    if (o.gating && !o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
