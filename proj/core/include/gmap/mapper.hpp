#pragma once

#include "gmap/sogmm.hpp"
#include "gmap/spatial_hash.hpp"
#include "gmap/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace gmap {

struct MapperConfig {
  // NaN means: calibrate on the first fitted frame at phi_quantile and freeze.
  double phi = std::numeric_limits<double>::quiet_NaN();
  double phi_quantile = 0.02;
  int min_relevant_points = 640;
  std::size_t cache_cap = 1000000;  // overflow forces a fit
  bool use_marginal = true;         // spatial-marginal scoring vs full 4D scoring
  bool use_submap = true;           // restrict scoring to the hash submap B
  SogmmConfig sogmm;
  HashGridSpec hash;

  void validate() const;
};

struct FrameReport {
  int frame_id = 0;
  std::size_t n_points = 0;    // |Z|
  std::size_t n_relevant = 0;  // |Z^r| (including cache at fit time)
  std::size_t n_submap = 0;    // |B|
  std::size_t n_components = 0;  // |K| after the frame
  bool fitted = false;
  bool cached = false;
  double t_relevant_s = 0.0;
  double t_fit_s = 0.0;
  double t_merge_s = 0.0;
  std::string error;
};

struct RelevantResult {
  std::vector<Eigen::Index> indices;  // frame rows classified as relevant
  std::size_t submap_size = 0;        // |B| (0 when the submap was not used)
  bool model_uninitialized = false;
};

/// Appends the local model's parameters to the global model and renormalizes
/// the weights in proportion to the two support counts.
void merge_global(Gmm4& global, const Gmm4& local);

/// Quantile of the frame's log-likelihood under the model, using the same
/// scoring path (marginal or 4D) the mapper will use.
double calibrate_phi(const Gmm4& model, const MultimodalCloud& held_in_frame, double quantile,
                     bool use_marginal = true);

/// Incremental pipeline state: global model, derived hash table, residual
/// cache. process_frame is exclusive; read-only queries between frames are
/// safe from any thread.
class Mapper {
 public:
  explicit Mapper(const MapperConfig& cfg);

  RelevantResult relevant_subset(const MultimodalCloud& frame) const;
  FrameReport process_frame(const MultimodalCloud& frame, const std::vector<double>& depths);

  const Gmm4& global() const { return global_; }
  const SpatialHashTable& table() const { return table_; }
  const MultimodalCloud& cache() const { return cache_; }
  double phi() const { return phi_; }
  bool initialized() const { return !global_.empty(); }
  const MapperConfig& config() const { return cfg_; }
  int frame_counter() const { return frame_counter_; }

 private:
  MapperConfig cfg_;
  Gmm4 global_;
  SpatialHashTable table_;
  MultimodalCloud cache_;
  std::vector<double> cache_depths_;
  double phi_;
  int frame_counter_ = 0;
};

}  // namespace gmap
