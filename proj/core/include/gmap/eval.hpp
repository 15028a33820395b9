#pragma once

#include "gmap/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gmap {

struct ReconstructionReport {
  double mre = 0.0;        // meters
  double precision = 0.0;  // in [0, 1]
  double recall = 0.0;     // in [0, 1]
  double psnr = 0.0;       // dB, capped at 99
  std::uint64_t model_bytes = 0;
};

inline constexpr double kPsnrCapDb = 99.0;

/// Voxel-grid downsample: one centroid (position and intensity averaged) per
/// occupied voxel. Output ordered by voxel index, so it is deterministic.
MultimodalCloud voxel_downsample(const MultimodalCloud& cloud, double voxel);

/// Ground truth: concatenation of world-frame clouds, voxel-downsampled.
MultimodalCloud build_ground_truth(const std::vector<MultimodalCloud>& world_clouds, double voxel);

/// MRE, precision, recall and intensity PSNR between a predicted and a
/// ground-truth cloud. Nearest neighbors are exact (kd-tree). model_bytes is
/// left at 0.
ReconstructionReport compute_metrics(const MultimodalCloud& pred, const MultimodalCloud& gt,
                                     double dist_thresh = 0.01);

/// Serialized size of the model: 16-byte header plus 15 f32 per component
/// (weight, 4 mean, 10 covariance upper triangle).
std::uint64_t model_bytes(const Gmm4& model);

struct ReportRow {
  std::string method;
  std::string param;
  ReconstructionReport report;
};

/// Aligned text table: Method, Param., MRE, Prec., Rec., PSNR, Mem. (MB).
std::string format_report_table(const std::vector<ReportRow>& rows);

/// Exact 3D nearest-neighbor index over a fixed point set.
class KnnIndex {
 public:
  explicit KnnIndex(const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts);

  /// Index and squared distance of the nearest stored point.
  std::pair<Eigen::Index, double> nearest(const Vec3& q) const;

  Eigen::Index size() const { return pts_.rows(); }

 private:
  struct Node {
    Eigen::Index begin, end;  // leaf range in order_
    int axis = -1;            // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(Eigen::Index begin, Eigen::Index end, int depth);
  void search(int node, const Vec3& q, Eigen::Index& best, double& best_d2) const;

  Eigen::Matrix<double, Eigen::Dynamic, 3> pts_;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace gmap
