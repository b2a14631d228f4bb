#pragma once

#include "pullback/convex.hpp"
#include "pullback/diffeo.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pullback {

/// Smallest d' in [1, d-1] whose discarded tail of sorted variances sums to
/// at most epsilon * sum(lambda); d when no such d' exists.
std::size_t select_dimension(const Vector& variances, double epsilon);

struct RaeConfig {
  double epsilon = 0.01;
  std::vector<std::size_t> order;  // decreasing-variance axis order (zero-based)
  std::size_t latent_dim = 0;      // d_epsilon

  static RaeConfig from_variances(const Vector& variances, double epsilon);
};

/// Encoder/decoder pair built from coordinate projections in phi-space:
///   E(x)_k = phi(x)[i_k],   D(z) = phi^{-1}(sum_k z_k e_{i_k}).
class RiemannianAutoencoder {
 public:
  RiemannianAutoencoder(std::shared_ptr<const Diffeomorphism> phi, DiagonalQuadratic psi,
                        double epsilon);

  const RaeConfig& config() const noexcept { return config_; }
  std::size_t latent_dim() const noexcept { return config_.latent_dim; }
  const DiagonalQuadratic& potential() const noexcept { return psi_; }
  const Diffeomorphism& diffeo() const noexcept { return *phi_; }

  Vector encode(const Vector& x) const;
  Vector decode(const Vector& z) const;
  RowMatrix encode_rows(const RowMatrix& x) const;
  RowMatrix decode_rows(const RowMatrix& z) const;

 private:
  std::shared_ptr<const Diffeomorphism> phi_;
  DiagonalQuadratic psi_;
  RaeConfig config_;
};

enum class AxisOrder { decreasing, increasing, random };

const char* to_string(AxisOrder order) noexcept;
AxisOrder parse_axis_order(const std::string& text);

enum class ErrorSpace { data, latent };

struct ReconstructionCurve {
  AxisOrder order = AxisOrder::decreasing;
  std::uint64_t seed = 0;
  std::vector<std::size_t> axes;    // the axis order actually used
  std::vector<double> mean_error;   // index k = number of retained axes, 0..d
};

/// Mean l2 reconstruction error when keeping the first k axes of `order` in
/// phi-space, for k = 0..d. With ErrorSpace::latent the error is measured as
/// ||P_k phi(x) - phi(x)||, which is non-increasing in k for any order.
ReconstructionCurve reconstruction_curve(const Diffeomorphism& phi, const DiagonalQuadratic& psi,
                                         const RowMatrix& data, AxisOrder order,
                                         std::uint64_t seed = 0,
                                         ErrorSpace space = ErrorSpace::data);

struct ManifoldMesh {
  RowMatrix latent;  // m^{d_eps} x d_eps
  RowMatrix points;  // m^{d_eps} x d
};

/// Decodes an m-per-axis grid over prod_k [-3 sqrt(lambda_{i_k}), 3 sqrt(lambda_{i_k})].
ManifoldMesh manifold_mesh(const RiemannianAutoencoder& rae, std::size_t per_axis);

struct RaeBoundCheck {
  std::size_t latent_dim = 0;
  double empirical = 0.0;       // mean ||D(E(X)) - X||^2
  double standard_error = 0.0;
  double expected = 0.0;        // analytic tail variance sum
  double bound = 0.0;           // epsilon * sum(lambda)
};

/// Monte Carlo check of the RAE error bound for phi = identity, where the
/// bound constants are all 1 and X ~ N(0, diag(lambda)).
RaeBoundCheck rae_bound_check_identity(const Vector& variances, double epsilon, std::size_t samples,
                                       std::uint64_t seed);

}  // namespace pullback
