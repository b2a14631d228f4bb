#pragma once

#include "pullback/flow.hpp"
#include "pullback/rng.hpp"

#include <cmath>
#include <string>

namespace pullback::testing {

// Fresh flows are the identity; randomise the zero-initialised output layers.
inline void randomize_outputs(Flow& flow, std::uint64_t seed, double scale = 0.01) {
  Rng rng(seed, 99);
  for (auto& p : flow.parameters())
    if (p.name.find(".out.") != std::string::npos)
      for (double& v : p.value.data()) v = scale * rng.normal();
}

inline Flow random_flow(std::size_t dim, std::size_t layers, std::size_t hidden, std::uint64_t seed,
                        double scale = 0.01) {
  FlowConfig c;
  c.dim = dim;
  c.layers = layers;
  c.hidden = hidden;
  Flow f(c, seed);
  randomize_outputs(f, seed, scale);
  return f;
}

inline Vector random_vector(std::size_t d, Rng& rng, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
  return v;
}

inline RowMatrix random_rows(std::size_t n, std::size_t d, Rng& rng, double scale = 1.0) {
  RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
  return m;
}

// One coupling layer whose scale output is log 2 everywhere and shift 0.
inline Flow doubling_layer() {
  FlowConfig c;
  c.dim = 2;
  c.layers = 1;
  c.hidden = 8;
  Flow f(c, 1);
  f.parameter("layer0.scale.out.bias").value[0] = c.s_max * std::atanh(std::log(2.0) / c.s_max);
  return f;
}

}  // namespace pullback::testing
