#pragma once

#include "pullback/geometry.hpp"
#include "pullback/model_io.hpp"
#include "pullback/rae.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace pullback {

inline constexpr const char* kEvalSchema = "pullback-eval/1";

struct Split {
  RowMatrix train;
  RowMatrix test;
};

/// Seeded shuffle; the first round(fraction * n) shuffled rows form the test split.
Split train_test_split(const RowMatrix& data, double test_fraction, std::uint64_t seed);

/// Endpoint pairs drawn uniformly without replacement from `points`
/// (2N distinct rows).
struct PairSet {
  RowMatrix from;
  RowMatrix to;
  std::size_t size() const { return std::size_t(from.rows()); }
};
PairSet sample_pairs(const RowMatrix& points, std::size_t n, std::uint64_t seed);

/// Per-coordinate standard deviation times `factor`.
Vector perturbation_scale(const RowMatrix& data, double factor);

struct ErrorStats {
  double mean = 0.0;
  double std = 0.0;  // over per-pair means
  std::size_t pairs = 0;
  std::size_t excluded = 0;  // pairs dropped after a numerical failure
  std::vector<double> per_pair;
};

ErrorStats summarize(std::vector<double> per_pair, std::size_t excluded);

/// (1/N) sum_i (1/T) sum_k ||gamma_learned(t_k) - gamma_truth(t_k)||.
ErrorStats geodesic_error(const PullbackManifold& learned, const PullbackManifold& truth, const PairSet& pairs,
                          std::size_t steps);

/// Mean over pairs and steps of ||gamma_{x0,x1}(t_k) - gamma_{x0,x1+dx}(t_k)|| with
/// dx ~ N(0, diag(sigma^2)); pair i draws from substream i.
ErrorStats variation_error(const PullbackManifold& manifold, const PairSet& pairs, const Vector& sigma,
                           std::size_t steps, std::uint64_t seed);

PullbackManifold manifold_of(const TrainedModel& model);
/// Ground-truth manifold of a Langevin dataset (banana, squeezed_banana, river).
PullbackManifold ground_truth_manifold(const std::string& dataset);

struct EvalConfig {
  std::size_t pairs = 100;
  std::size_t steps = 100;
  double sigma_factor = 0.05;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct EvalCell {
  std::string dataset;
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  ErrorStats geodesic;
  ErrorStats variation;
  std::map<std::string, std::string> hyperparameters;
};

struct EvalReport {
  EvalConfig config;
  std::vector<EvalCell> cells;    // one per (dataset, variant, seed)
  std::vector<EvalCell> summary;  // one per (dataset, variant), pairs pooled over seeds

  std::string to_json() const;
  /// "dataset,variant,seed,metric,mean,std,pairs,excluded"; summary rows carry seed "all".
  std::string to_csv() const;
  const EvalCell* find(const std::string& dataset, const std::string& variant) const;
};

/// Evaluates a single model against the ground truth on pairs drawn from
/// `test_points`. Pair selection and perturbations depend only on
/// `config.seed`, so identical models give identical cells.
EvalCell evaluate_model(const TrainedModel& model, const std::string& dataset, const RowMatrix& test_points,
                        const EvalConfig& config);

struct TableJob {
  std::string dataset;
  std::string variant;
  std::uint64_t seed = 0;
  std::function<TrainedModel()> model;  // may throw; the cell then records the error
  std::map<std::string, std::string> hyperparameters;
};

/// Runs every job, evaluating on `test_points[dataset]` with pair seed
/// `config.seed + job.seed`, and pools the seeds into summary cells.
EvalReport run_table(const std::vector<TableJob>& jobs, const std::map<std::string, RowMatrix>& test_points,
                     const EvalConfig& config);

/// "t,x_1..x_d,variant" rows for each labelled manifold's geodesic x -> y.
std::string geodesic_curves_csv(const std::vector<std::pair<std::string, const PullbackManifold*>>& manifolds,
                                const Vector& x, const Vector& y, std::size_t steps);

struct RaeReport {
  double epsilon = 0.01;
  std::size_t latent_dim = 0;
  Vector variances;
  std::vector<std::size_t> order;
  std::vector<ReconstructionCurve> curves;

  std::string to_json() const;
};

RaeReport rae_report(const TrainedModel& model, const RowMatrix& data, double epsilon, std::uint64_t seed);

}  // namespace pullback
