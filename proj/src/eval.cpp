#include "pullback/eval.hpp"

#include "pullback/datagen.hpp"
#include "pullback/error.hpp"
#include "pullback/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace pullback {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RowMatrix take_rows(const RowMatrix& data, const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi) {
  RowMatrix out(Eigen::Index(hi - lo), data.cols());
  for (std::size_t i = lo; i < hi; ++i) out.row(Eigen::Index(i - lo)) = data.row(Eigen::Index(idx[i]));
  return out;
}

double curve_gap(const RowMatrix& a, const RowMatrix& b) {
  return (a - b).rowwise().norm().mean();
}

}  // namespace

Split train_test_split(const RowMatrix& data, double test_fraction, std::uint64_t seed) {
  require(test_fraction >= 0.0 && test_fraction <= 1.0, ErrorKind::invalid_argument,
          "test fraction must lie in [0, 1]");
  const std::size_t n = std::size_t(data.rows());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, 0x5B);
  rng.shuffle(idx);
  const std::size_t n_test = std::size_t(std::llround(test_fraction * double(n)));
  return {take_rows(data, idx, n_test, n), take_rows(data, idx, 0, n_test)};
}

PairSet sample_pairs(const RowMatrix& points, std::size_t n, std::uint64_t seed) {
  const std::size_t m = std::size_t(points.rows());
  require(2 * n <= m, ErrorKind::invalid_argument,
          "need " + std::to_string(2 * n) + " distinct points for " + std::to_string(n) + " pairs, have " +
              std::to_string(m));
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, 0x9A);
  rng.shuffle(idx);
  return {take_rows(points, idx, 0, n), take_rows(points, idx, n, 2 * n)};
}

Vector perturbation_scale(const RowMatrix& data, double factor) {
  require(data.rows() >= 2, ErrorKind::invalid_argument, "perturbation scale needs at least two points");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::RowVectorXd var =
      (data.rowwise() - mean).array().square().colwise().sum() / double(data.rows() - 1);
  return (factor * var.array().sqrt()).transpose();
}

ErrorStats summarize(std::vector<double> per_pair, std::size_t excluded) {
  ErrorStats s;
  s.pairs = per_pair.size();
  s.excluded = excluded;
  if (!per_pair.empty()) {
    s.mean = std::accumulate(per_pair.begin(), per_pair.end(), 0.0) / double(per_pair.size());
    double ss = 0.0;
    for (double v : per_pair) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / double(per_pair.size()));
  }
  s.per_pair = std::move(per_pair);
  return s;
}

ErrorStats geodesic_error(const PullbackManifold& learned, const PullbackManifold& truth, const PairSet& pairs,
                          std::size_t steps) {
  require(steps >= 2, ErrorKind::invalid_argument, "geodesic error needs T >= 2");
  require(learned.dim() == truth.dim(), ErrorKind::dimension_mismatch,
          "learned and ground-truth manifolds differ in dimension");
  std::vector<double> per_pair;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vector x = pairs.from.row(Eigen::Index(i)).transpose();
    const Vector y = pairs.to.row(Eigen::Index(i)).transpose();
    try {
      const double e = curve_gap(learned.geodesic_curve(x, y, steps), truth.geodesic_curve(x, y, steps));
      if (!std::isfinite(e)) {
        ++excluded;
        continue;
      }
      per_pair.push_back(e);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::numeric) throw;
      ++excluded;
    }
  }
  return summarize(std::move(per_pair), excluded);
}

ErrorStats variation_error(const PullbackManifold& manifold, const PairSet& pairs, const Vector& sigma,
                           std::size_t steps, std::uint64_t seed) {
  require(steps >= 2, ErrorKind::invalid_argument, "variation error needs T >= 2");
  require(std::size_t(sigma.size()) == manifold.dim(), ErrorKind::dimension_mismatch,
          "perturbation scale has the wrong dimension");
  require((sigma.array() > 0.0).all(), ErrorKind::invalid_argument, "perturbation scale must be positive");
  const Rng root(seed, 0x7E);
  std::vector<double> per_pair;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Rng rng = root.substream(i);
    const Vector x = pairs.from.row(Eigen::Index(i)).transpose();
    const Vector y = pairs.to.row(Eigen::Index(i)).transpose();
    Vector z = y;
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] += sigma[j] * rng.normal();
    try {
      const double e = curve_gap(manifold.geodesic_curve(x, y, steps), manifold.geodesic_curve(x, z, steps));
      if (!std::isfinite(e)) {
        ++excluded;
        continue;
      }
      per_pair.push_back(e);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::numeric) throw;
      ++excluded;
    }
  }
  return summarize(std::move(per_pair), excluded);
}

PullbackManifold manifold_of(const TrainedModel& model) {
  return PullbackManifold(std::make_shared<Flow>(model.flow), std::make_shared<DiagonalQuadratic>(model.potential));
}

PullbackManifold ground_truth_manifold(const std::string& dataset) {
  const auto target = target_for_dataset(dataset);
  require(target.has_value(), ErrorKind::invalid_argument,
          "no ground-truth manifold for dataset '" + dataset + "'");
  return PullbackManifold(std::make_shared<GroundTruthDiffeo>(target->diffeo()),
                          std::make_shared<DiagonalQuadratic>(target->potential()));
}

EvalCell evaluate_model(const TrainedModel& model, const std::string& dataset, const RowMatrix& test_points,
                        const EvalConfig& config) {
  EvalCell cell;
  cell.dataset = dataset;
  cell.variant = model.variant;
  cell.seed = config.seed;
  require(std::size_t(test_points.cols()) == model.flow.dim(), ErrorKind::dimension_mismatch,
          "test data has dimension " + std::to_string(test_points.cols()) + ", model has " +
              std::to_string(model.flow.dim()));
  const PullbackManifold truth = ground_truth_manifold(dataset);
  const PullbackManifold learned = manifold_of(model);
  const PairSet pairs = sample_pairs(test_points, config.pairs, config.seed);
  const Vector sigma = perturbation_scale(test_points, config.sigma_factor);
  cell.geodesic = geodesic_error(learned, truth, pairs, config.steps);
  cell.variation = variation_error(learned, pairs, sigma, config.steps, config.seed);
  return cell;
}

EvalReport run_table(const std::vector<TableJob>& jobs, const std::map<std::string, RowMatrix>& test_points,
                     const EvalConfig& config) {
  EvalReport report;
  report.config = config;
  for (const TableJob& job : jobs) {
    EvalCell cell;
    cell.dataset = job.dataset;
    cell.variant = job.variant;
    cell.seed = job.seed;
    try {
      const auto it = test_points.find(job.dataset);
      require(it != test_points.end(), ErrorKind::invalid_argument, "no test points for '" + job.dataset + "'");
      EvalConfig c = config;
      c.seed = config.seed + job.seed;
      TrainedModel model = job.model();
      model.variant = job.variant;
      cell = evaluate_model(model, job.dataset, it->second, c);
      cell.seed = job.seed;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    cell.hyperparameters = job.hyperparameters;
    report.cells.push_back(std::move(cell));
  }

  for (const EvalCell& c : report.cells) {
    if (report.find(c.dataset, c.variant)) continue;
    EvalCell s;
    s.dataset = c.dataset;
    s.variant = c.variant;
    std::vector<double> geo, var;
    std::size_t geo_ex = 0, var_ex = 0;
    for (const EvalCell& o : report.cells) {
      if (o.dataset != c.dataset || o.variant != c.variant) continue;
      if (!o.ok) {
        s.ok = false;
        s.error += (s.error.empty() ? "" : "; ") + ("seed " + std::to_string(o.seed) + ": " + o.error);
        continue;
      }
      geo.insert(geo.end(), o.geodesic.per_pair.begin(), o.geodesic.per_pair.end());
      var.insert(var.end(), o.variation.per_pair.begin(), o.variation.per_pair.end());
      geo_ex += o.geodesic.excluded;
      var_ex += o.variation.excluded;
      if (s.hyperparameters.empty()) s.hyperparameters = o.hyperparameters;
    }
    s.geodesic = summarize(std::move(geo), geo_ex);
    s.variation = summarize(std::move(var), var_ex);
    if (s.geodesic.pairs > 0) s.ok = true;
    report.summary.push_back(std::move(s));
  }
  return report;
}

const EvalCell* EvalReport::find(const std::string& dataset, const std::string& variant) const {
  for (const EvalCell& c : summary)
    if (c.dataset == dataset && c.variant == variant) return &c;
  return nullptr;
}

namespace {

nlohmann::json stats_json(const ErrorStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"pairs", s.pairs}, {"excluded", s.excluded}};
}

nlohmann::json cell_json(const EvalCell& c, bool with_seed) {
  nlohmann::json j;
  j["dataset"] = c.dataset;
  j["variant"] = c.variant;
  if (with_seed) j["seed"] = c.seed;
  j["ok"] = c.ok;
  if (!c.error.empty()) j["error"] = c.error;
  j["geodesic_error"] = stats_json(c.geodesic);
  j["variation_error"] = stats_json(c.variation);
  j["hyperparameters"] = c.hyperparameters;
  return j;
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["schema"] = kEvalSchema;
  j["config"] = {{"pairs", config.pairs},
                 {"steps", config.steps},
                 {"sigma_factor", config.sigma_factor},
                 {"test_fraction", config.test_fraction},
                 {"seed", config.seed}};
  j["cells"] = nlohmann::json::array();
  for (const EvalCell& c : cells) j["cells"].push_back(cell_json(c, true));
  j["summary"] = nlohmann::json::array();
  for (const EvalCell& c : summary) j["summary"].push_back(cell_json(c, false));
  return j.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "dataset,variant,seed,metric,mean,std,pairs,excluded\n";
  auto rows = [&](const EvalCell& c, const std::string& seed) {
    for (const auto& [name, s] : {std::pair{"geodesic", &c.geodesic}, std::pair{"variation", &c.variation}}) {
      out << c.dataset << "," << c.variant << "," << seed << "," << name << ",";
      if (c.ok) out << fmt(s->mean) << "," << fmt(s->std);
      else out << "nan,nan";
      out << "," << s->pairs << "," << s->excluded << "\n";
    }
  };
  for (const EvalCell& c : cells) rows(c, std::to_string(c.seed));
  for (const EvalCell& c : summary) rows(c, "all");
  return out.str();
}

std::string geodesic_curves_csv(const std::vector<std::pair<std::string, const PullbackManifold*>>& manifolds,
                                const Vector& x, const Vector& y, std::size_t steps) {
  std::ostringstream out;
  out << "t";
  for (Eigen::Index c = 0; c < x.size(); ++c) out << ",x_" << (c + 1);
  out << ",variant\n";
  for (const auto& [label, m] : manifolds) {
    const RowMatrix curve = m->geodesic_curve(x, y, steps);
    for (Eigen::Index k = 0; k < curve.rows(); ++k) {
      out << fmt(double(k) / double(steps - 1));
      for (Eigen::Index c = 0; c < curve.cols(); ++c) out << "," << fmt(curve(k, c));
      out << "," << label << "\n";
    }
  }
  return out.str();
}

RaeReport rae_report(const TrainedModel& model, const RowMatrix& data, double epsilon, std::uint64_t seed) {
  RaeReport r;
  r.epsilon = epsilon;
  r.variances = model.potential.variances();
  const RaeConfig cfg = RaeConfig::from_variances(r.variances, epsilon);
  r.latent_dim = cfg.latent_dim;
  r.order = cfg.order;
  for (AxisOrder o : {AxisOrder::decreasing, AxisOrder::increasing, AxisOrder::random})
    r.curves.push_back(reconstruction_curve(model.flow, model.potential, data, o, seed));
  return r;
}

std::string RaeReport::to_json() const {
  nlohmann::json j;
  j["schema"] = kEvalSchema;
  j["epsilon"] = epsilon;
  j["latent_dim"] = latent_dim;
  j["variances"] = std::vector<double>(variances.data(), variances.data() + variances.size());
  j["order"] = order;
  j["curves"] = nlohmann::json::array();
  for (const auto& c : curves)
    j["curves"].push_back(
        {{"order", to_string(c.order)}, {"seed", c.seed}, {"axes", c.axes}, {"mean_error", c.mean_error}});
  return j.dump(2) + "\n";
}

}  // namespace pullback
