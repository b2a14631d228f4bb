#include "pullback/datagen.hpp"

#include "pullback/error.hpp"
#include "pullback/rng.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>

namespace pullback {

TargetDensity::TargetDensity(GroundTruthDiffeo phi, DiagonalQuadratic psi, std::string name)
    : phi_(std::move(phi)), psi_(std::move(psi)), name_(std::move(name)) {
  require(phi_.dim() == psi_.dim(), ErrorKind::dimension_mismatch,
          "target diffeomorphism and potential dimensions differ");
}

double TargetDensity::log_density(const Vector& x) const { return -psi_.value(phi_.forward(x)); }

Vector TargetDensity::score(const Vector& x) const {
  return -(phi_.jacobian(x).transpose() * psi_.grad(phi_.forward(x)));
}

TargetDensity make_banana(BananaVariant variant) {
  const double first = variant == BananaVariant::single ? 1.0 / 4.0 : 1.0 / 81.0;
  return TargetDensity(GroundTruthDiffeo::banana(1.0 / 9.0, 0.0), DiagonalQuadratic(Vector{{first, 4.0}}),
                       variant == BananaVariant::single ? "banana" : "squeezed_banana");
}

TargetDensity make_river() {
  return TargetDensity(GroundTruthDiffeo::river(2.0, 0.0), DiagonalQuadratic(Vector{{1.0 / 25.0, 3.0}}),
                       "river");
}

namespace {

// -log q(to | from) up to a constant, for the Langevin proposal
// to = from + (delta^2 / 2) score(from) + delta * eta.
double proposal_energy(const Vector& to, const Vector& from, const Vector& score_from, double delta) {
  return (to - from - 0.5 * delta * delta * score_from).squaredNorm() / (2.0 * delta * delta);
}

double log_acceptance(const TargetDensity& target, const Vector& x, double logp_x, const Vector& score_x,
                      const Vector& xp, double logp_xp, const Vector& score_xp, double delta) {
  const double k_forward = proposal_energy(x, xp, score_xp, delta);  // q(x | x')
  const double k_reverse = proposal_energy(xp, x, score_x, delta);   // q(x' | x)
  (void)target;
  return std::min(0.0, logp_xp - logp_x - k_forward + k_reverse);
}

}  // namespace

double mala_acceptance(const TargetDensity& target, const Vector& x, const Vector& proposal,
                       double step_size) {
  return std::exp(log_acceptance(target, x, target.log_density(x), target.score(x), proposal,
                                 target.log_density(proposal), target.score(proposal), step_size));
}

Dataset langevin_mh_sample(const TargetDensity& target, std::size_t n, const LangevinOptions& options,
                           std::uint64_t seed, double* acceptance_rate) {
  require(options.step_size > 0.0, ErrorKind::invalid_argument, "Langevin step size must be positive");
  require(options.steps >= 1, ErrorKind::invalid_argument, "Langevin chains need at least one step");
  const std::size_t d = target.dim();
  const double delta = options.step_size;

  Dataset out;
  out.samples = RowMatrix(Eigen::Index(n), Eigen::Index(d));
  out.generator = target.name();
  out.seed = seed;
  out.parameters["steps"] = std::to_string(options.steps);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", options.step_size);
  out.parameters["step_size"] = buf;
  out.parameters["sampler"] = "langevin_mh";

  const Rng root(seed, 0x1A);
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.substream(i);
    Vector x = Vector::Zero(Eigen::Index(d));
    double logp = target.log_density(x);
    Vector score = target.score(x);
    Vector eta{Eigen::Index(d)};
    for (std::size_t k = 0; k < options.steps; ++k) {
      for (Eigen::Index j = 0; j < eta.size(); ++j) eta[j] = rng.normal();
      const Vector xp = x + 0.5 * delta * delta * score + delta * eta;
      const double logp_p = target.log_density(xp);
      const Vector score_p = target.score(xp);
      const double log_a = log_acceptance(target, x, logp, score, xp, logp_p, score_p, delta);
      if (std::log(rng.uniform()) < log_a) {
        x = xp;
        logp = logp_p;
        score = score_p;
        ++accepted;
      }
    }
    require(x.allFinite(), ErrorKind::numeric, "Langevin chain diverged");
    out.samples.row(Eigen::Index(i)) = x.transpose();
  }
  if (acceptance_rate)
    *acceptance_rate = n ? double(accepted) / double(n * options.steps) : 0.0;
  return out;
}

Dataset make_hemisphere(std::size_t intrinsic_dim, std::size_t ambient_dim, std::size_t n,
                        std::uint64_t seed, RowMatrix* unembedded, Matrix* embedding) {
  require(intrinsic_dim >= 1, ErrorKind::invalid_argument, "hemisphere needs d' >= 1");
  require(ambient_dim >= intrinsic_dim + 1, ErrorKind::invalid_argument,
          "hemisphere needs d >= d' + 1 (got d' = " + std::to_string(intrinsic_dim) +
              ", d = " + std::to_string(ambient_dim) + ")");
  const auto d = Eigen::Index(ambient_dim);
  const auto m = Eigen::Index(intrinsic_dim + 1);

  const Rng root(seed, 0x4E);
  Rng embed_rng = root.substream(0);
  Matrix a(d, m);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < m; ++c) a(r, c) = embed_rng.normal();
  Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, m);

  RowMatrix sphere(Eigen::Index(n), m);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.substream(i + 1);
    std::vector<double> theta(intrinsic_dim);
    theta[0] = rng.beta(5.0, 5.0) * std::numbers::pi / 2.0;
    for (std::size_t k = 1; k < intrinsic_dim; ++k) theta[k] = rng.uniform(0.0, std::numbers::pi);
    double sin_prod = 1.0;
    for (std::size_t k = 0; k < intrinsic_dim; ++k) {
      sphere(Eigen::Index(i), Eigen::Index(k)) = sin_prod * std::cos(theta[k]);
      sin_prod *= std::sin(theta[k]);
    }
    sphere(Eigen::Index(i), m - 1) = sin_prod;
  }

  Dataset out;
  out.samples = sphere * q.transpose();
  out.generator = "hemisphere";
  out.seed = seed;
  out.parameters["intrinsic_dim"] = std::to_string(intrinsic_dim);
  out.parameters["ambient_dim"] = std::to_string(ambient_dim);
  out.parameters["beta_shape"] = "5";
  if (unembedded) *unembedded = std::move(sphere);
  if (embedding) *embedding = q;
  return out;
}

Dataset make_sinusoid(std::size_t intrinsic_dim, std::size_t ambient_dim, std::size_t n,
                      std::uint64_t seed) {
  require(intrinsic_dim >= 1, ErrorKind::invalid_argument, "sinusoid needs d' >= 1");
  require(ambient_dim > intrinsic_dim, ErrorKind::invalid_argument,
          "sinusoid needs d > d' (got d' = " + std::to_string(intrinsic_dim) +
              ", d = " + std::to_string(ambient_dim) + ")");
  constexpr double kLatentVariance = 3.0;
  constexpr double kNoiseVariance = 1e-3;
  const std::size_t extra = ambient_dim - intrinsic_dim;

  const Rng root(seed, 0x51);
  Rng shear_rng = root.substream(0);
  Matrix shear{Eigen::Index(extra), Eigen::Index(intrinsic_dim)};
  for (Eigen::Index j = 0; j < shear.rows(); ++j)
    for (Eigen::Index k = 0; k < shear.cols(); ++k) shear(j, k) = shear_rng.uniform(1.0, 2.0);

  Dataset out;
  out.samples = RowMatrix(Eigen::Index(n), Eigen::Index(ambient_dim));
  const double latent_sd = std::sqrt(kLatentVariance);
  const double noise_sd = std::sqrt(kNoiseVariance);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.substream(i + 1);
    Vector z{Eigen::Index(intrinsic_dim)};
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = latent_sd * rng.normal();
    const auto row = Eigen::Index(i);
    for (std::size_t j = 0; j < extra; ++j)
      out.samples(row, Eigen::Index(j)) = std::sin(shear.row(Eigen::Index(j)).dot(z)) + noise_sd * rng.normal();
    for (std::size_t k = 0; k < intrinsic_dim; ++k)
      out.samples(row, Eigen::Index(extra + k)) = z[Eigen::Index(k)];
  }
  out.generator = "sinusoid";
  out.seed = seed;
  out.parameters["intrinsic_dim"] = std::to_string(intrinsic_dim);
  out.parameters["ambient_dim"] = std::to_string(ambient_dim);
  out.parameters["latent_variance"] = "3";
  out.parameters["noise_variance"] = "0.001";
  return out;
}

std::optional<TargetDensity> target_for_dataset(const std::string& name) {
  if (name == "banana") return make_banana(BananaVariant::single);
  if (name == "squeezed_banana") return make_banana(BananaVariant::squeezed);
  if (name == "river") return make_river();
  return std::nullopt;
}

Dataset generate_dataset(const std::string& name, std::size_t n, std::uint64_t seed,
                         std::size_t intrinsic_dim, std::size_t ambient_dim,
                         const LangevinOptions& options) {
  if (auto target = target_for_dataset(name)) return langevin_mh_sample(*target, n, options, seed);
  if (name == "hemisphere") return make_hemisphere(intrinsic_dim, ambient_dim, n, seed);
  if (name == "sinusoid") return make_sinusoid(intrinsic_dim, ambient_dim, n, seed);
  fail(ErrorKind::invalid_argument, "unknown dataset '" + name +
                                        "' (expected banana, squeezed_banana, river, hemisphere, sinusoid)");
}

}  // namespace pullback
