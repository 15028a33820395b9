#pragma once

#include "gmap/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace gmap {

/// Regular grid used for hashing. The origin is fixed to -alpha/2 * extents
/// so the workspace is centered on the world origin.
struct HashGridSpec {
  double alpha = 0.2;  // cell side length, meters
  std::array<int, 3> extents = {256, 256, 256};

  Vec3 origin() const {
    return -0.5 * alpha * Vec3(extents[0], extents[1], extents[2]);
  }
  void validate() const;
};

/// Cell index of p, or nullopt when p falls outside the grid extents.
std::optional<std::int64_t> try_hash_key(const Vec3& p, const HashGridSpec& spec);

/// Cell index of p: Nz * (r * Nx + c) + s with r, c, s the floored y, x, z
/// offsets from the grid origin. Throws std::out_of_range outside the grid.
std::int64_t hash_key(const Vec3& p, const HashGridSpec& spec);

/// The spatial mean plus the 6 eigen-axis endpoints of the 1/2/3-sigma
/// ellipsoids of the spatial covariance block (19 points). ring_subdivisions
/// adds intermediate directions between each pair of eigen axes.
std::vector<Vec3> component_keys(const GaussianComponent4& component, int ring_subdivisions = 0);

/// Sparse map from grid cell to the global-model component indices whose
/// sigma ellipsoids touch that cell.
class SpatialHashTable {
 public:
  SpatialHashTable() = default;
  explicit SpatialHashTable(const HashGridSpec& spec) : spec_(spec) { spec_.validate(); }

  const HashGridSpec& spec() const { return spec_; }

  /// Appends component_index to every in-bounds cell keyed by the component's
  /// mean and sigma-ellipsoid points. Out-of-bounds keys are skipped and
  /// counted.
  void insert_component(std::uint32_t component_index, const GaussianComponent4& component,
                        int ring_subdivisions = 0);

  /// Union of the index vectors of every in-bounds query point's cell,
  /// deduplicated and sorted.
  std::vector<std::uint32_t> query_submap(
      const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts) const;

  const std::vector<std::uint32_t>* cell(std::int64_t key) const;

  std::size_t cell_count() const { return table_.size(); }
  std::uint64_t out_of_bounds_skips() const { return oob_skips_; }
  std::uint32_t max_index() const { return max_index_; }

 private:
  HashGridSpec spec_;
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> table_;
  std::uint64_t oob_skips_ = 0;
  std::uint32_t max_index_ = 0;
};

/// Rebuilds the derived table from a loaded global model.
SpatialHashTable build_hash_table(const Gmm4& model, const HashGridSpec& spec,
                                  int ring_subdivisions = 0);

}  // namespace gmap
