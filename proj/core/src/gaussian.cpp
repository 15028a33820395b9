#include "gmap/gaussian.hpp"

#include <algorithm>

namespace gmap {

Gmm3 marginalize_spatial(const Gmm4& model) {
  Gmm3 out;
  out.support_count = model.support_count;
  out.components.reserve(model.size());
  for (const auto& c : model.components) {
    GaussianComponent3 m;
    m.weight = c.weight;
    m.mean = c.mean.head<3>();
    m.cov = c.cov.topLeftCorner<3, 3>();
    out.components.push_back(m);
  }
  return out;
}

ConditionalIntensity condition_intensity(const Gmm4& model, const Vec3& x) {
  if (model.empty()) throw std::invalid_argument("condition_intensity: empty model");
  if (!x.allFinite()) throw std::invalid_argument("condition_intensity: non-finite query");

  const std::size_t k_count = model.size();
  std::vector<double> log_w(k_count);
  std::vector<double> cond_mean(k_count);
  std::vector<double> cond_var(k_count);

  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& c = model.components[k];
    const Mat3 cov_xx = c.cov.topLeftCorner<3, 3>();
    const Vec3 cov_xi = c.cov.topRightCorner<3, 1>();
    const double cov_ii = c.cov(3, 3);
    const Mat3 chol = cholesky_lower<3>(cov_xx, kCovarianceEpsilon);

    log_w[k] = std::log(c.weight) + gaussian_log_density<3>(x, c.mean.head<3>(), chol);

    // Conditional Gaussian: i | x ~ N(nu_i + S_ix S_xx^-1 (x - nu_x), S_ii - S_ix S_xx^-1 S_xi)
    const Vec3 delta = x - c.mean.head<3>();
    const Vec3 w1 = chol.triangularView<Eigen::Lower>().solve(delta);
    const Vec3 w2 = chol.triangularView<Eigen::Lower>().solve(cov_xi);
    cond_mean[k] = c.mean[3] + w2.dot(w1);
    cond_var[k] = std::max(0.0, cov_ii - w2.squaredNorm());
  }

  const double lse = log_sum_exp(log_w.data(), k_count);
  // exp(lse) == 0 means x is so far from every component that all spatial
  // densities underflowed; there is no meaningful conditional.
  if (!std::isfinite(lse) || lse < -700.0) {
    throw std::domain_error("condition_intensity: query point has no support under the model");
  }

  double mean = 0.0;
  double second_moment = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const double w = std::exp(log_w[k] - lse);
    mean += w * cond_mean[k];
    second_moment += w * (cond_var[k] + cond_mean[k] * cond_mean[k]);
  }
  const double variance = std::max(0.0, second_moment - mean * mean);
  return {std::clamp(mean, 0.0, 1.0), variance};
}

}  // namespace gmap
