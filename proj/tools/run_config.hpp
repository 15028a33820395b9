#pragma once

#include "gmap/infer.hpp"
#include "gmap/mapper.hpp"

#include <filesystem>
#include <string>

namespace gmap::cli {

/// Everything a pipeline run needs, serialized as one JSON document so a run
/// is reproducible from the config file alone.
struct RunConfig {
  MapperConfig mapper;
  InferenceConfig infer;
  double gt_voxel = 0.01;      // ground-truth downsample cell, meters
  double dist_thresh = 0.01;   // precision/recall match radius, meters
  int decimation = 1;          // pixel stride when back-projecting frames
  int threads = 0;             // 0 = hardware concurrency

  void validate() const;
};

std::string serialize_config(const RunConfig& cfg);
RunConfig parse_config(const std::string& text);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace gmap::cli
