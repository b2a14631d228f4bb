#pragma once

#include "pullback/diffeo.hpp"
#include "pullback/graph.hpp"
#include "pullback/rng.hpp"
#include "pullback/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pullback {

struct FlowConfig {
  std::size_t dim = 2;
  std::size_t layers = 8;   // number of coupling layers ("flow steps")
  std::size_t hidden = 64;  // conditioner width
  std::size_t blocks = 2;   // residual blocks per conditioner
  double s_max = 5.0;       // scale clamp: s = s_max * tanh(raw / s_max)
};

/// Parameter indices of one residual conditioner:
///   h = p W_in + b_in
///   h <- h + relu(relu(h) W1 + b1) W2 + b2      (per block)
///   out = h W_out + b_out
struct ResidualNet {
  std::size_t w_in = 0, b_in = 0;
  struct Block {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  };
  std::vector<Block> blocks;
  std::size_t w_out = 0, b_out = 0;
};

/// Affine coupling layer: coordinates in `pass` are copied, coordinates in
/// `transform` become x * exp(s(x_pass)) + t(x_pass).
struct CouplingLayer {
  std::vector<bool> mask;  // true = pass-through
  std::vector<std::size_t> pass;
  std::vector<std::size_t> transform;
  std::vector<std::size_t> permutation;  // maps [pass, transform] back to coordinate order
  ResidualNet scale;
  ResidualNet shift;
};

struct FlowBatchResult {
  RowMatrix y;
  Vector logdet;
};

/// Differentiable outputs of a recorded flow pass.
struct FlowGraphOutput {
  ad::NodeId y;            // B x d
  ad::NodeId logdet;       // B x 1
  ad::NodeId tangents{};   // (k B) x d, valid when tangents were supplied
  bool has_tangents = false;
};

/// phi: R^d -> R^d as a stack of affine coupling layers with residual
/// conditioners. Every conditioner's output layer starts at zero, so a fresh
/// flow is the identity map.
class Flow final : public Diffeomorphism {
 public:
  Flow(const FlowConfig& config, std::uint64_t seed);

  const FlowConfig& config() const noexcept { return config_; }
  std::size_t dim() const override { return config_.dim; }
  const std::vector<CouplingLayer>& layers() const noexcept { return layers_; }

  std::vector<ad::Parameter>& parameters() noexcept { return params_; }
  const std::vector<ad::Parameter>& parameters() const noexcept { return params_; }
  ad::Parameter& parameter(const std::string& name);
  const ad::Parameter& parameter(const std::string& name) const;

  Vector forward(const Vector& x) const override;
  Vector inverse(const Vector& y) const override;
  Matrix jacobian(const Vector& x) const override;
  Vector jvp(const Vector& x, const Vector& v) const override;
  double logdet(const Vector& x) const;
  RowMatrix forward_rows(const RowMatrix& x) const override { return forward_batch(x).y; }
  RowMatrix inverse_rows(const RowMatrix& y) const override { return inverse_batch(y); }

  /// Row-wise evaluation of a batch (B x d).
  FlowBatchResult forward_batch(const RowMatrix& x) const;
  RowMatrix inverse_batch(const RowMatrix& y) const;
  /// Row b of the result is D_{x_b} phi [v_b].
  RowMatrix jvp_batch(const RowMatrix& x, const RowMatrix& v) const;

  /// Records phi on the batch `x` (B x d) into `graph`. When `tangents` is
  /// given it must be (k B) x d holding k stacked direction blocks; the output
  /// then also carries D phi applied to each block, built from differentiable
  /// ops with ReLU derivatives entering as stop-gradient masks.
  FlowGraphOutput record(ad::Graph& graph, const RowMatrix& x,
                         const std::optional<RowMatrix>& tangents = std::nullopt);

 private:
  friend class FlowBuilder;
  Flow() = default;
  void init(const FlowConfig& config, const std::vector<std::vector<bool>>& masks, Rng& rng);

  ResidualNet make_net(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
  std::size_t add_param(std::string name, ad::Tensor value);

  FlowConfig config_;
  std::vector<CouplingLayer> layers_;
  std::vector<ad::Parameter> params_;
};

/// Builds a flow from explicit masks and parameter tensors (deserialization).
class FlowBuilder {
 public:
  static Flow build(const FlowConfig& config, const std::vector<std::vector<bool>>& masks,
                    const std::vector<std::pair<std::string, ad::Tensor>>& params);
};

/// Even layers pass the even-indexed coordinates (ceil(d/2) of them), odd
/// layers pass the odd-indexed ones.
std::vector<bool> coupling_mask(std::size_t dim, std::size_t layer);

}  // namespace pullback
