#include "pullback/rae.hpp"

#include "pullback/error.hpp"
#include "pullback/rng.hpp"

#include <cmath>
#include <numeric>

namespace pullback {

std::size_t select_dimension(const Vector& variances, double epsilon) {
  require(variances.size() > 0, ErrorKind::invalid_argument, "select_dimension: no variances");
  require(epsilon >= 0.0 && epsilon <= 1.0, ErrorKind::invalid_argument,
          "select_dimension: epsilon must lie in [0, 1]");
  for (Eigen::Index i = 0; i < variances.size(); ++i)
    require(variances[i] > 0.0, ErrorKind::invalid_argument, "select_dimension: variances must be positive");

  const std::size_t d = std::size_t(variances.size());
  const auto order = sorted_variance_order(variances);
  const double threshold = epsilon * variances.sum();
  if (variances[Eigen::Index(order[d - 1])] > threshold) return d;

  // tail[k] = sum of the sorted variances at positions k..d-1
  std::vector<double> tail(d + 1, 0.0);
  for (std::size_t k = d; k-- > 0;) tail[k] = tail[k + 1] + variances[Eigen::Index(order[k])];
  for (std::size_t dp = 1; dp < d; ++dp)
    if (tail[dp] <= threshold) return dp;
  return d;
}

RaeConfig RaeConfig::from_variances(const Vector& variances, double epsilon) {
  RaeConfig cfg;
  cfg.epsilon = epsilon;
  cfg.order = sorted_variance_order(variances);
  cfg.latent_dim = select_dimension(variances, epsilon);
  return cfg;
}

RiemannianAutoencoder::RiemannianAutoencoder(std::shared_ptr<const Diffeomorphism> phi,
                                             DiagonalQuadratic psi, double epsilon)
    : phi_(std::move(phi)), psi_(std::move(psi)) {
  require(phi_ != nullptr, ErrorKind::invalid_argument, "autoencoder needs a diffeomorphism");
  require(phi_->dim() == psi_.dim(), ErrorKind::dimension_mismatch,
          "autoencoder diffeomorphism and potential dimensions differ");
  config_ = RaeConfig::from_variances(psi_.variances(), epsilon);
}

Vector RiemannianAutoencoder::encode(const Vector& x) const {
  return encode_rows(x.transpose()).row(0).transpose();
}

Vector RiemannianAutoencoder::decode(const Vector& z) const {
  return decode_rows(z.transpose()).row(0).transpose();
}

RowMatrix RiemannianAutoencoder::encode_rows(const RowMatrix& x) const {
  const RowMatrix y = phi_->forward_rows(x);
  RowMatrix z(x.rows(), Eigen::Index(config_.latent_dim));
  for (std::size_t k = 0; k < config_.latent_dim; ++k)
    z.col(Eigen::Index(k)) = y.col(Eigen::Index(config_.order[k]));
  return z;
}

RowMatrix RiemannianAutoencoder::decode_rows(const RowMatrix& z) const {
  require(std::size_t(z.cols()) == config_.latent_dim, ErrorKind::dimension_mismatch,
          "decode: latent has " + std::to_string(z.cols()) + " coordinates, expected " +
              std::to_string(config_.latent_dim));
  RowMatrix y = RowMatrix::Zero(z.rows(), Eigen::Index(psi_.dim()));
  for (std::size_t k = 0; k < config_.latent_dim; ++k)
    y.col(Eigen::Index(config_.order[k])) = z.col(Eigen::Index(k));
  return phi_->inverse_rows(y);
}

const char* to_string(AxisOrder order) noexcept {
  switch (order) {
    case AxisOrder::decreasing: return "decreasing";
    case AxisOrder::increasing: return "increasing";
    case AxisOrder::random: return "random";
  }
  return "unknown";
}

AxisOrder parse_axis_order(const std::string& text) {
  if (text == "decreasing") return AxisOrder::decreasing;
  if (text == "increasing") return AxisOrder::increasing;
  if (text == "random") return AxisOrder::random;
  fail(ErrorKind::invalid_argument, "unknown axis order '" + text + "'");
}

ReconstructionCurve reconstruction_curve(const Diffeomorphism& phi, const DiagonalQuadratic& psi,
                                         const RowMatrix& data, AxisOrder order, std::uint64_t seed,
                                         ErrorSpace space) {
  require(data.rows() > 0, ErrorKind::invalid_argument, "reconstruction curve needs data");
  require(std::size_t(data.cols()) == psi.dim() && phi.dim() == psi.dim(),
          ErrorKind::dimension_mismatch, "reconstruction curve: dimension mismatch");
  const std::size_t d = psi.dim();

  ReconstructionCurve curve;
  curve.order = order;
  curve.seed = seed;
  curve.axes = psi.sorted_variance_order();
  if (order == AxisOrder::increasing) std::reverse(curve.axes.begin(), curve.axes.end());
  if (order == AxisOrder::random) {
    std::iota(curve.axes.begin(), curve.axes.end(), std::size_t{0});
    Rng rng(seed, 0xAE);
    rng.shuffle(curve.axes);
  }

  const RowMatrix y = phi.forward_rows(data);
  RowMatrix kept = RowMatrix::Zero(y.rows(), y.cols());
  for (std::size_t k = 0; k <= d; ++k) {
    if (k > 0) {
      const auto axis = Eigen::Index(curve.axes[k - 1]);
      kept.col(axis) = y.col(axis);
    }
    RowMatrix diff;
    if (space == ErrorSpace::latent) {
      diff = kept - y;
    } else {
      diff = phi.inverse_rows(kept) - data;
    }
    curve.mean_error.push_back(diff.rowwise().norm().mean());
  }
  return curve;
}

ManifoldMesh manifold_mesh(const RiemannianAutoencoder& rae, std::size_t per_axis) {
  const std::size_t de = rae.latent_dim();
  require(de <= 3, ErrorKind::invalid_argument,
          "manifold mesh needs d_eps <= 3 (got " + std::to_string(de) +
              "); use the reconstruction curve for higher latent dimensions");
  require(per_axis >= 1, ErrorKind::invalid_argument, "mesh needs at least one point per axis");

  std::size_t count = 1;
  for (std::size_t k = 0; k < de; ++k) count *= per_axis;
  ManifoldMesh mesh;
  mesh.latent = RowMatrix(Eigen::Index(count), Eigen::Index(de));
  const Vector& lam = rae.potential().variances();
  const auto& order = rae.config().order;
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t rest = idx;
    for (std::size_t k = de; k-- > 0;) {
      const std::size_t j = rest % per_axis;
      rest /= per_axis;
      const double half = 3.0 * std::sqrt(lam[Eigen::Index(order[k])]);
      const double z = per_axis == 1 ? 0.0 : -half + 2.0 * half * double(j) / double(per_axis - 1);
      mesh.latent(Eigen::Index(idx), Eigen::Index(k)) = z;
    }
  }
  mesh.points = rae.decode_rows(mesh.latent);
  return mesh;
}

RaeBoundCheck rae_bound_check_identity(const Vector& variances, double epsilon, std::size_t samples,
                                       std::uint64_t seed) {
  require(samples >= 2, ErrorKind::invalid_argument, "bound check needs at least two samples");
  const std::size_t d = std::size_t(variances.size());
  RiemannianAutoencoder rae(std::make_shared<GroundTruthDiffeo>(GroundTruthDiffeo::identity(d)),
                            DiagonalQuadratic(variances), epsilon);

  RowMatrix x{Eigen::Index(samples), Eigen::Index(d)};
  Rng rng(seed, 0xB0);
  const Vector sd = variances.array().sqrt();
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = sd[c] * rng.normal();

  const RowMatrix rec = rae.decode_rows(rae.encode_rows(x));
  const Vector err = (rec - x).rowwise().squaredNorm();

  RaeBoundCheck out;
  out.latent_dim = rae.latent_dim();
  out.empirical = err.mean();
  const double var = (err.array() - out.empirical).square().sum() / double(samples - 1);
  out.standard_error = std::sqrt(var / double(samples));
  const auto& order = rae.config().order;
  for (std::size_t k = out.latent_dim; k < d; ++k) out.expected += variances[Eigen::Index(order[k])];
  out.bound = epsilon * variances.sum();
  return out;
}

}  // namespace pullback
