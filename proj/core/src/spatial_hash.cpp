#include "gmap/spatial_hash.hpp"

#include "gmap/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gmap {

void HashGridSpec::validate() const {
  if (alpha <= 0.0) throw std::invalid_argument("HashGridSpec: alpha must be > 0");
  for (int e : extents) {
    if (e < 1) throw std::invalid_argument("HashGridSpec: extents must be >= 1");
  }
}

std::optional<std::int64_t> try_hash_key(const Vec3& p, const HashGridSpec& spec) {
  if (!p.allFinite()) throw std::invalid_argument("hash_key: non-finite point");
  const Vec3 o = spec.origin();
  // row-major over (row, col, slice) with r along y, c along x, s along z
  const auto r = static_cast<std::int64_t>(std::floor((p.y() - o.y()) / spec.alpha));
  const auto c = static_cast<std::int64_t>(std::floor((p.x() - o.x()) / spec.alpha));
  const auto s = static_cast<std::int64_t>(std::floor((p.z() - o.z()) / spec.alpha));
  if (r < 0 || r >= spec.extents[1] || c < 0 || c >= spec.extents[0] || s < 0 ||
      s >= spec.extents[2]) {
    return std::nullopt;
  }
  return spec.extents[2] * (r * spec.extents[0] + c) + s;
}

std::int64_t hash_key(const Vec3& p, const HashGridSpec& spec) {
  const auto key = try_hash_key(p, spec);
  if (!key) throw std::out_of_range("hash_key: point outside grid extents");
  return *key;
}

std::vector<Vec3> component_keys(const GaussianComponent4& component, int ring_subdivisions) {
  const Vec3 mean = component.mean.head<3>();
  const Mat3 cov = component.cov.topLeftCorner<3, 3>();
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw std::domain_error("component_keys: eigendecomposition failed");
  }

  // Scaled principal axes: sqrt(lambda_d) * v_d.
  std::array<Vec3, 3> axes;
  for (int d = 0; d < 3; ++d) {
    axes[static_cast<std::size_t>(d)] =
        std::sqrt(std::max(0.0, eig.eigenvalues()[d])) * eig.eigenvectors().col(d);
  }

  std::vector<Vec3> keys;
  keys.push_back(mean);
  for (int sigma = 1; sigma <= 3; ++sigma) {
    for (const Vec3& axis : axes) {
      keys.push_back(mean + sigma * axis);
      keys.push_back(mean - sigma * axis);
    }
    if (ring_subdivisions > 0) {
      // Extra directions on the great circles between each axis pair.
      for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
          for (int t = 1; t <= ring_subdivisions; ++t) {
            const double ang = 0.5 * std::numbers::pi * t / (ring_subdivisions + 1);
            const Vec3 dir = std::cos(ang) * axes[static_cast<std::size_t>(a)] +
                             std::sin(ang) * axes[static_cast<std::size_t>(b)];
            keys.push_back(mean + sigma * dir);
            keys.push_back(mean - sigma * dir);
          }
        }
      }
    }
  }
  return keys;
}

void SpatialHashTable::insert_component(std::uint32_t component_index,
                                        const GaussianComponent4& component,
                                        int ring_subdivisions) {
  for (const Vec3& key : component_keys(component, ring_subdivisions)) {
    const auto cell_key = try_hash_key(key, spec_);
    if (!cell_key) {
      oob_skips_ += 1;
      continue;
    }
    auto& vec = table_[*cell_key];
    if (std::find(vec.begin(), vec.end(), component_index) == vec.end()) {
      vec.push_back(component_index);
    }
  }
  max_index_ = std::max(max_index_, component_index);
}

std::vector<std::uint32_t> SpatialHashTable::query_submap(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts) const {
  std::vector<std::uint32_t> out;
  for (Eigen::Index n = 0; n < pts.rows(); ++n) {
    const auto key = try_hash_key(pts.row(n).transpose(), spec_);
    if (!key) continue;
    auto it = table_.find(*key);
    if (it == table_.end()) continue;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const std::vector<std::uint32_t>* SpatialHashTable::cell(std::int64_t key) const {
  auto it = table_.find(key);
  return it == table_.end() ? nullptr : &it->second;
}

SpatialHashTable build_hash_table(const Gmm4& model, const HashGridSpec& spec,
                                  int ring_subdivisions) {
  SpatialHashTable table(spec);
  for (std::size_t k = 0; k < model.size(); ++k) {
    table.insert_component(static_cast<std::uint32_t>(k), model.components[k], ring_subdivisions);
  }
  return table;
}

}  // namespace gmap
