#include "gmap/infer.hpp"

#include "gmap/gaussian.hpp"
#include "gmap/parallel.hpp"
#include "gmap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gmap {

void InferenceConfig::validate() const {
  if (batch_components < 1) throw std::invalid_argument("InferenceConfig: batch_components < 1");
}

MultimodalCloud reconstruct(const Gmm4& model, const InferenceConfig& cfg) {
  cfg.validate();
  // 1e-6 weight slack: models loaded from disk went through f32, which
  // perturbs the weight sum by up to ~2^-24
  validate_gmm<4>(model, 1e-6);

  const std::size_t k_count = model.size();
  std::vector<Eigen::Index> n_k(k_count);
  std::vector<Eigen::Index> offset(k_count);
  Eigen::Index total = 0;
  const bool guarantee_min = cfg.total_samples >= k_count;
  for (std::size_t k = 0; k < k_count; ++k) {
    auto n = static_cast<Eigen::Index>(
        std::llround(model.components[k].weight * static_cast<double>(cfg.total_samples)));
    if (guarantee_min) n = std::max<Eigen::Index>(n, 1);
    n_k[k] = n;
    offset[k] = total;
    total += n;
  }

  MultimodalCloud out(total);
  const CounterRng base{cfg.rng_seed};

  for (std::size_t batch_begin = 0; batch_begin < k_count;
       batch_begin += static_cast<std::size_t>(cfg.batch_components)) {
    const std::size_t batch_end =
        std::min(k_count, batch_begin + static_cast<std::size_t>(cfg.batch_components));
    parallel_for(batch_end - batch_begin, [&](std::size_t begin, std::size_t end) {
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t k = batch_begin + b;
        if (n_k[k] == 0) continue;
        const auto& c = model.components[k];

        GaussianComponent3 spatial;
        spatial.mean = c.mean.head<3>();
        spatial.cov = c.cov.topLeftCorner<3, 3>();
        const auto samples =
            sample_component<3>(spatial, n_k[k], base.split(static_cast<std::uint64_t>(k)).seed);

        // Per-component conditional: i = nu_i + S_ix S_xx^-1 (x - nu_x).
        const Mat3 chol = cholesky_lower<3>(spatial.cov, kCovarianceEpsilon);
        const Vec3 w2 = chol.triangularView<Eigen::Lower>().solve(Vec3(c.cov.topRightCorner<3, 1>()));

        for (Eigen::Index s = 0; s < n_k[k]; ++s) {
          const Vec3 x = samples.row(s).transpose();
          double intensity;
          if (cfg.exact_conditional) {
            intensity = condition_intensity(model, x).mean;
          } else {
            const Vec3 w1 = chol.triangularView<Eigen::Lower>().solve(Vec3(x - spatial.mean));
            intensity = std::clamp(c.mean[3] + w2.dot(w1), 0.0, 1.0);
          }
          out.pts.row(offset[k] + s) << x.x(), x.y(), x.z(), intensity;
        }
      }
    });
  }
  return out;
}

}  // namespace gmap
