#pragma once

#include "gmap/types.hpp"

#include <random>

namespace gmap::bench {

/// Mixture with components scattered in a box, mildly anisotropic
/// covariances, uniform weights. Deterministic in (k, seed).
inline Gmm4 make_model(int k, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-8.0, 8.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Gmm4 model;
  model.support_count = static_cast<std::uint64_t>(k) * 100;
  model.components.resize(k);
  for (auto& c : model.components) {
    c.weight = 1.0 / k;
    c.mean = Vec4(pos(rng), pos(rng), pos(rng), unit(rng));
    Mat4 a;
    for (int i = 0; i < 16; ++i) a(i / 4, i % 4) = 0.02 * gauss(rng);
    c.cov = a * a.transpose() + 1e-4 * Mat4::Identity();
  }
  return model;
}

inline Eigen::Matrix<double, Eigen::Dynamic, 3> make_queries(int n, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-8.0, 8.0);
  Eigen::Matrix<double, Eigen::Dynamic, 3> pts(n, 3);
  for (int i = 0; i < n; ++i) pts.row(i) = Vec3(pos(rng), pos(rng), pos(rng)).transpose();
  return pts;
}

}  // namespace gmap::bench
