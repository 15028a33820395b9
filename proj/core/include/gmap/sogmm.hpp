#pragma once

#include "gmap/gaussian.hpp"
#include "gmap/types.hpp"

#include <vector>

namespace gmap {

struct SogmmConfig {
  double bandwidth = 0.02;      // GBMS kernel radius on normalized 2D features
  int em_max_iters = 100;
  double em_tol = 1e-4;         // relative data log-likelihood change
  int gbms_max_iters = 100;
  double gbms_shift_tol = 0.0;  // 0 => 1e-4 * bandwidth
  int min_points_per_component = 4;

  double shift_tol() const { return gbms_shift_tol > 0.0 ? gbms_shift_tol : 1e-4 * bandwidth; }
  void validate() const;
};

struct GbmsResult {
  int mode_count = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 2> modes;  // mode_count x 2
  std::vector<int> assignments;                    // nearest mode per input feature
};

/// Mode seeking on 2D features: seeds at occupied bandwidth-cell centers,
/// each seed repeatedly moved to the Gaussian-weighted mean of features
/// within the bandwidth radius, converged seeds merged within bandwidth/2.
GbmsResult gbms_mode_count(const Eigen::Matrix<double, Eigen::Dynamic, 2>& features,
                           const SogmmConfig& cfg);

struct ResponsibilityMatrix {
  Eigen::MatrixXd gamma;            // N x mode_count, rows sum to 1
  std::vector<int> dropped_modes;   // original mode indices with zero members
};

/// Hard one-hot responsibilities from mode assignments. Modes with no
/// assigned points are dropped and reported.
ResponsibilityMatrix kinit_responsibilities(const std::vector<int>& assignments, int mode_count);

struct EmResult {
  Gmm4 model;
  int iterations = 0;
  int removed_components = 0;
  std::vector<double> log_likelihood;  // data log-likelihood after each iteration
};

/// Log-space EM on 4D points from an initial responsibility matrix.
EmResult em_fit(const Eigen::Matrix<double, Eigen::Dynamic, 4>& points,
                const Eigen::MatrixXd& gamma0, const SogmmConfig& cfg);

/// One E-step under the given model: N x |J| responsibilities plus the data
/// log-likelihood. Exposed for equivalence checks against the direct form.
std::pair<Eigen::MatrixXd, double> em_responsibilities(
    const Eigen::Matrix<double, Eigen::Dynamic, 4>& points, const Gmm4& model);

/// Full per-frame fit: GBMS on (min-max normalized depth, intensity)
/// features, KInit, then EM. The mode count is capped at
/// floor(N / min_points_per_component), minimum 1.
Gmm4 fit_sogmm(const MultimodalCloud& frame_points, const std::vector<double>& depth_per_point,
               const SogmmConfig& cfg);

}  // namespace gmap
