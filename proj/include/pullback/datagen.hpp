#pragma once

#include "pullback/convex.hpp"
#include "pullback/diffeo.hpp"
#include "pullback/tensor.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace pullback {

inline constexpr const char* kDatasetSchema = "pullback-dataset/1";

/// Unnormalised density p(x) = exp(-psi(phi(x))) with diagonal quadratic psi.
class TargetDensity {
 public:
  TargetDensity(GroundTruthDiffeo phi, DiagonalQuadratic psi, std::string name);

  const std::string& name() const noexcept { return name_; }
  const GroundTruthDiffeo& diffeo() const noexcept { return phi_; }
  const DiagonalQuadratic& potential() const noexcept { return psi_; }
  std::size_t dim() const { return phi_.dim(); }

  double log_density(const Vector& x) const;  // up to an additive constant
  /// grad log p(x) = -(D_x phi)^T grad psi(phi(x)).
  Vector score(const Vector& x) const;

 private:
  GroundTruthDiffeo phi_;
  DiagonalQuadratic psi_;
  std::string name_;
};

enum class BananaVariant { single, squeezed };

TargetDensity make_banana(BananaVariant variant = BananaVariant::single);
TargetDensity make_river();

/// Samples plus the generator provenance.
struct Dataset {
  RowMatrix samples;
  std::string generator;
  std::map<std::string, std::string> parameters;
  std::uint64_t seed = 0;

  std::size_t size() const { return std::size_t(samples.rows()); }
  std::size_t dim() const { return std::size_t(samples.cols()); }
};

struct LangevinOptions {
  std::size_t steps = 5000;  // T
  double step_size = 0.1;    // delta
};

/// MALA acceptance probability for a move x -> x' (Langevin proposal with
/// step size delta) under `target`.
double mala_acceptance(const TargetDensity& target, const Vector& x, const Vector& proposal,
                       double step_size);

/// Independent chains started at 0, one per sample, each run for `steps`
/// Langevin proposals with Metropolis-Hastings correction; chain i draws from
/// substream i so the output is independent of evaluation order.
Dataset langevin_mh_sample(const TargetDensity& target, std::size_t n, const LangevinOptions& options,
                           std::uint64_t seed, double* acceptance_rate = nullptr);

/// Upper hemisphere of S^{d'} (theta_1 ~ Beta(5,5) pi/2, others ~ U(0, pi))
/// embedded isometrically into R^d by the Q factor of a Gaussian d x (d'+1)
/// matrix. `unembedded`, when given, receives the R^{d'+1} points.
Dataset make_hemisphere(std::size_t intrinsic_dim, std::size_t ambient_dim, std::size_t n,
                        std::uint64_t seed, RowMatrix* unembedded = nullptr,
                        Matrix* embedding = nullptr);

/// z ~ N(0, 3 I_{d'}); x_j = sin(a_j^T z) + N(0, 1e-3) with a_j ~ U(1, 2)^{d'};
/// rows are [x_1..x_{d-d'}, z_1..z_{d'}].
Dataset make_sinusoid(std::size_t intrinsic_dim, std::size_t ambient_dim, std::size_t n,
                      std::uint64_t seed);

/// Builds a dataset by name: banana, squeezed_banana, river, hemisphere, sinusoid.
Dataset generate_dataset(const std::string& name, std::size_t n, std::uint64_t seed,
                         std::size_t intrinsic_dim = 0, std::size_t ambient_dim = 0,
                         const LangevinOptions& options = {});

/// Ground-truth target for the Langevin datasets, if the name is one of them.
std::optional<TargetDensity> target_for_dataset(const std::string& name);

/// CSV with header "x1,...,xd" plus a JSON sidecar at `path + ".meta.json"`.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace pullback
