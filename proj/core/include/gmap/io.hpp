#pragma once

#include "gmap/types.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmap {

struct CameraIntrinsics {
  double fx = 525.0, fy = 525.0;  // pixels
  double cx = 319.5, cy = 239.5;  // pixels
  int width = 640, height = 480;
  double depth_scale = 1000.0;  // raw units per meter

  void validate() const;
};

template <typename T>
struct Image {
  int width = 0, height = 0;
  std::vector<T> pixels;  // row-major

  T& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  const T& at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

using ImageU16 = Image<std::uint16_t>;  // depth, depth_scale units
using ImageU8 = Image<std::uint8_t>;    // grayscale intensity

// Binary PGM (P5), 8-bit for intensity and 16-bit big-endian for depth.
ImageU8 load_pgm8(const std::filesystem::path& path);
ImageU16 load_pgm16(const std::filesystem::path& path);
void save_pgm8(const ImageU8& img, const std::filesystem::path& path);
void save_pgm16(const ImageU16& img, const std::filesystem::path& path);

/// Back-projects every decimation-th pixel with valid depth into the sensor
/// frame; returns the cloud plus per-point metric depth.
std::pair<MultimodalCloud, std::vector<double>> load_frame(const ImageU16& depth,
                                                           const ImageU8& intensity,
                                                           const CameraIntrinsics& intrinsics,
                                                           int decimation = 1);

MultimodalCloud transform_cloud(const MultimodalCloud& cloud, const Pose& pose);

struct ModelIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ModelBadMagic : ModelIoError {
  ModelBadMagic() : ModelIoError("model file: bad magic") {}
};
struct ModelBadVersion : ModelIoError {
  ModelBadVersion() : ModelIoError("model file: unsupported version") {}
};
struct ModelTruncated : ModelIoError {
  ModelTruncated() : ModelIoError("model file: truncated") {}
};

// Binary model format, little-endian:
//   "SGMM" | version u32 | component count u32 | support_count u32
// then per component: weight f32, mean 4xf32, covariance upper triangle
// 10xf32 row-major. File size is exactly 16 + 60 * |K| bytes.
void save_model(const Gmm4& model, const std::filesystem::path& path);
Gmm4 load_model(const std::filesystem::path& path);

/// Binary little-endian PLY with float x, y, z and uchar intensity
/// (round(i * 255)).
void export_ply(const MultimodalCloud& cloud, const std::filesystem::path& path);
MultimodalCloud import_ply(const std::filesystem::path& path);

// Line-oriented manifest:
//   # comment
//   intrinsics <fx> <fy> <cx> <cy> <width> <height> <depth_scale>
//   frame <depth_path> <intensity_path> <16 row-major pose floats>
// Relative frame paths are resolved against the manifest directory.
struct Manifest {
  CameraIntrinsics intrinsics;
  struct Frame {
    std::filesystem::path depth_path;
    std::filesystem::path intensity_path;
    Pose pose;
  };
  std::vector<Frame> frames;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace gmap
