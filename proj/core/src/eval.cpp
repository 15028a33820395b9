#include "gmap/eval.hpp"

#include "gmap/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace gmap {

MultimodalCloud voxel_downsample(const MultimodalCloud& cloud, double voxel) {
  if (voxel <= 0.0) throw std::invalid_argument("voxel_downsample: voxel must be > 0");
  if (cloud.empty()) throw std::invalid_argument("voxel_downsample: empty cloud");

  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::map<Key, std::pair<Vec4, std::int64_t>> cells;  // sum, count; ordered for determinism
  for (Eigen::Index n = 0; n < cloud.size(); ++n) {
    const Key key{static_cast<std::int64_t>(std::floor(cloud.pts(n, 0) / voxel)),
                  static_cast<std::int64_t>(std::floor(cloud.pts(n, 1) / voxel)),
                  static_cast<std::int64_t>(std::floor(cloud.pts(n, 2) / voxel))};
    auto [it, inserted] = cells.try_emplace(key, Vec4::Zero(), 0);
    it->second.first += cloud.pts.row(n).transpose();
    it->second.second += 1;
  }

  MultimodalCloud out(static_cast<Eigen::Index>(cells.size()));
  Eigen::Index row = 0;
  for (const auto& [key, acc] : cells) {
    out.pts.row(row++) = (acc.first / static_cast<double>(acc.second)).transpose();
  }
  return out;
}

MultimodalCloud build_ground_truth(const std::vector<MultimodalCloud>& world_clouds,
                                   double voxel) {
  MultimodalCloud all;
  for (const auto& c : world_clouds) all.append(c);
  return voxel_downsample(all, voxel);
}

KnnIndex::KnnIndex(const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts) : pts_(pts) {
  if (pts_.rows() == 0) throw std::invalid_argument("KnnIndex: empty point set");
  order_.resize(static_cast<std::size_t>(pts_.rows()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  nodes_.reserve(static_cast<std::size_t>(2 * pts_.rows() / 8 + 4));
  root_ = build(0, pts_.rows(), 0);
}

int KnnIndex::build(Eigen::Index begin, Eigen::Index end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  constexpr Eigen::Index kLeafSize = 16;
  if (end - begin <= kLeafSize) return id;

  const int axis = depth % 3;
  const Eigen::Index mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](Eigen::Index a, Eigen::Index b) { return pts_(a, axis) < pts_(b, axis); });
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = pts_(order_[static_cast<std::size_t>(mid)], axis);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void KnnIndex::search(int node, const Vec3& q, Eigen::Index& best, double& best_d2) const {
  const Node& nd = nodes_[static_cast<std::size_t>(node)];
  if (nd.axis < 0) {
    for (Eigen::Index i = nd.begin; i < nd.end; ++i) {
      const Eigen::Index idx = order_[static_cast<std::size_t>(i)];
      const double d2 = (pts_.row(idx).transpose() - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  const double delta = q[nd.axis] - nd.split;
  const int near = delta < 0.0 ? nd.left : nd.right;
  const int far = delta < 0.0 ? nd.right : nd.left;
  search(near, q, best, best_d2);
  if (delta * delta < best_d2) search(far, q, best, best_d2);
}

std::pair<Eigen::Index, double> KnnIndex::nearest(const Vec3& q) const {
  Eigen::Index best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, q, best, best_d2);
  return {best, best_d2};
}

namespace {

// For each point of `from`: nearest-neighbor distance into `to` and the
// intensity of that neighbor.
void nearest_stats(const MultimodalCloud& from, const MultimodalCloud& to,
                   Eigen::VectorXd& dist, Eigen::VectorXd& nn_intensity) {
  const KnnIndex index(Eigen::Matrix<double, Eigen::Dynamic, 3>(to.xyz()));
  dist.resize(from.size());
  nn_intensity.resize(from.size());
  parallel_for(static_cast<std::size_t>(from.size()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const auto rn = static_cast<Eigen::Index>(n);
      const auto [idx, d2] = index.nearest(from.position(rn));
      dist[rn] = std::sqrt(d2);
      nn_intensity[rn] = to.pts(idx, 3);
    }
  });
}

}  // namespace

ReconstructionReport compute_metrics(const MultimodalCloud& pred, const MultimodalCloud& gt,
                                     double dist_thresh) {
  if (pred.empty() || gt.empty()) throw std::invalid_argument("compute_metrics: empty cloud");

  Eigen::VectorXd pred_dist, pred_nn_i;
  nearest_stats(pred, gt, pred_dist, pred_nn_i);
  Eigen::VectorXd gt_dist, gt_nn_i;
  nearest_stats(gt, pred, gt_dist, gt_nn_i);

  ReconstructionReport report;
  report.mre = pred_dist.mean();
  report.precision =
      static_cast<double>((pred_dist.array() <= dist_thresh).count()) / pred_dist.size();
  report.recall = static_cast<double>((gt_dist.array() <= dist_thresh).count()) / gt_dist.size();

  const double mse = (pred.intensity() - pred_nn_i).squaredNorm() / pred_dist.size();
  report.psnr = mse > 0.0 ? std::min(kPsnrCapDb, -10.0 * std::log10(mse)) : kPsnrCapDb;
  return report;
}

std::uint64_t model_bytes(const Gmm4& model) {
  return 16 + 60 * static_cast<std::uint64_t>(model.size());
}

std::string format_report_table(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "Method        Param.    MRE (m)   Prec.   Rec.    PSNR (dB)  Mem. (MB)\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-13s %-9s %-9.4f %-7.3f %-7.3f %-10.2f %.4f\n",
                  r.method.c_str(), r.param.c_str(), r.report.mre, r.report.precision,
                  r.report.recall, r.report.psnr,
                  static_cast<double>(r.report.model_bytes) / (1024.0 * 1024.0));
    os << line;
  }
  return os.str();
}

}  // namespace gmap
