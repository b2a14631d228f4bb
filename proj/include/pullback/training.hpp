#pragma once

#include "pullback/flow.hpp"
#include "pullback/graph.hpp"
#include "pullback/model_io.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace pullback {

enum class Variant { ours, standard_nf, anisotropic_nf, isometric_nf };

const char* to_string(Variant v) noexcept;
Variant parse_variant(const std::string& text);
inline constexpr Variant kAllVariants[] = {Variant::ours, Variant::standard_nf, Variant::anisotropic_nf,
                                          Variant::isometric_nf};

struct TrainConfig {
  Variant variant = Variant::ours;
  std::string dataset;
  std::size_t flow_steps = 8;
  std::size_t hidden = 64;
  std::size_t blocks = 2;
  double s_max = 5.0;
  std::size_t epochs = 1000;
  std::size_t batch_size = 64;
  double lambda_iso = 1.0;
  double lambda_vol = 1.0;
  double learning_rate = 3e-4;
  std::size_t warmup_steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double weight_decay = 1e-5;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;

  /// Per-dataset defaults (flow steps, epochs, batch size, regularisation
  /// weights, learning rate) for the named experiment, e.g. "hemisphere_5_20".
  static TrainConfig defaults_for(const std::string& dataset);

  /// Regularisation weights and variance trainability implied by the variant.
  double effective_lambda_iso() const;
  double effective_lambda_vol() const;
  bool variances_trainable() const;

  FlowConfig flow_config(std::size_t dim) const;

  /// Overrides fields from "key = value" lines ('#' starts a comment).
  void apply_text(const std::string& text);
  void apply(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
};

TrainConfig load_train_config(const std::string& path, const std::string& dataset_hint = "");

/// Linear warm-up over `warmup` steps followed by cosine annealing to 0 at
/// `total` steps. `step` is zero-based.
double learning_rate_at(std::size_t step, std::size_t total, std::size_t warmup, double base);

/// Adam with coupled L2 weight decay (added to the clipped gradient).
class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, double beta1, double beta2, double eps, double weight_decay);
  void step(double lr);
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::size_t t_ = 0;
};

/// Rescales all gradients so their global l2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<ad::Parameter* const> params, double max_norm);

/// Trainable pieces of the density: the flow and the log-variances a with
/// lambda = exp(a).
struct DensityModel {
  DensityModel(const FlowConfig& config, std::uint64_t seed);
  explicit DensityModel(TrainedModel model);

  Flow flow;
  ad::Parameter log_variances;  // 1 x d

  DiagonalQuadratic potential() const;
  std::vector<ad::Parameter*> parameters();
};

struct LossNodes {
  ad::NodeId nll;
  ad::NodeId vol;
  ad::NodeId iso;
  ad::NodeId total;
  bool has_iso = false;
};

/// mean_b [ 1/2 phi(x)^T A^{-1} phi(x) - log|det D phi| ] + 1/2 sum log lambda + d/2 log 2 pi
ad::NodeId nll(ad::Graph& g, DensityModel& model, const RowMatrix& batch);
/// mean_b (log|det D phi|)^2
ad::NodeId volume_penalty(ad::Graph& g, DensityModel& model, const RowMatrix& batch);
/// mean_b ||J^T J - I||_F^2 with J assembled from d differentiable JVPs.
ad::NodeId isometry_penalty(ad::Graph& g, DensityModel& model, const RowMatrix& batch);
/// Same penalty given the stacked Jacobian columns: `columns` is (d B) x d
/// with block i holding J e_i for every sample.
ad::NodeId isometry_penalty_from_columns(ad::Graph& g, ad::NodeId columns, std::size_t dim);

/// Records every loss term of the adapted objective with one flow pass.
LossNodes record_loss(ad::Graph& g, DensityModel& model, const RowMatrix& batch, double lambda_vol,
                      double lambda_iso);

struct EpochRecord {
  std::size_t epoch = 0;
  double nll = 0.0;
  double vol = 0.0;
  double iso = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch training of the adapted objective. Deterministic for a fixed
/// seed. Throws Error{numeric} naming epoch and batch on a non-finite loss.
TrainResult train(const RowMatrix& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Continues training an existing model.
TrainResult train(DensityModel model, const RowMatrix& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

void save_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

}  // namespace pullback
