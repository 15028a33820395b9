#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gmap {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// N x 4 multimodal point cloud. Columns 0..2 are world/sensor-frame
/// coordinates in meters, column 3 is intensity in [0, 1].
struct MultimodalCloud {
  Eigen::Matrix<double, Eigen::Dynamic, 4> pts;

  MultimodalCloud() : pts(0, 4) {}
  explicit MultimodalCloud(Eigen::Index n) : pts(n, 4) {}

  Eigen::Index size() const { return pts.rows(); }
  bool empty() const { return pts.rows() == 0; }

  auto xyz() { return pts.leftCols<3>(); }
  auto xyz() const { return pts.leftCols<3>(); }
  auto intensity() { return pts.col(3); }
  auto intensity() const { return pts.col(3); }

  Vec3 position(Eigen::Index n) const { return pts.row(n).head<3>().transpose(); }
  Vec4 point(Eigen::Index n) const { return pts.row(n).transpose(); }

  void append(const MultimodalCloud& other) {
    Eigen::Index n = pts.rows();
    pts.conservativeResize(n + other.pts.rows(), Eigen::NoChange);
    pts.bottomRows(other.pts.rows()) = other.pts;
  }
};

template <int D>
struct GaussianComponent {
  double weight = 0.0;
  Eigen::Matrix<double, D, 1> mean = Eigen::Matrix<double, D, 1>::Zero();
  Eigen::Matrix<double, D, D> cov = Eigen::Matrix<double, D, D>::Identity();
};

using GaussianComponent3 = GaussianComponent<3>;
using GaussianComponent4 = GaussianComponent<4>;

/// Weighted Gaussian mixture. support_count records how many data points the
/// model (or any model merged into it) was fit from.
template <int D>
struct Gmm {
  std::vector<GaussianComponent<D>> components;
  std::uint64_t support_count = 0;

  std::size_t size() const { return components.size(); }
  bool empty() const { return components.empty(); }

  double weight_sum() const {
    double s = 0.0;
    for (const auto& c : components) s += c.weight;
    return s;
  }
};

using Gmm3 = Gmm<3>;
using Gmm4 = Gmm<4>;

/// Rigid transform taking sensor frame to world frame.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Pose compose(const Pose& inner) const {
    // this * inner: apply inner first.
    return Pose{rotation * inner.rotation, rotation * inner.translation + translation};
  }

  bool is_valid(double tol = 1e-6) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(rotation.determinant() - 1.0) < tol;
  }
};

}  // namespace gmap
