#pragma once

#include "gmap/io.hpp"
#include "gmap/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace gmap {

/// Axis-aligned textured rectangle. axis is the normal direction (0=x, 1=y,
/// 2=z); plane is the coordinate along that axis; [lo0, hi0] x [lo1, hi1]
/// bound the other two axes in ascending axis order.
struct Quad {
  int axis = 2;
  double plane = 0.0;
  double lo0 = 0.0, hi0 = 1.0;
  double lo1 = 0.0, hi1 = 1.0;
};

struct SynthScene {
  std::vector<Quad> quads;
  std::function<double(const Vec3&)> intensity;  // world position -> [0, 1]
};

/// Closed box room with a smooth low-frequency intensity field.
SynthScene make_room_scene(double lx = 4.0, double ly = 3.0, double lz = 2.5);

/// Single wall (y = wall_y) over x in [-half_width, half_width] plus a floor.
SynthScene make_wall_scene(double wall_y = 2.0, double half_width = 3.0, double height = 2.5);

/// Long box corridor along +x.
SynthScene make_corridor_scene(double length = 24.0, double half_width = 1.0, double height = 2.5);

/// Sensor-to-world pose with the camera at eye looking at target (pinhole
///// convention: z forward, x right, y down). up must not be parallel to the
/// view direction.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 0, 1));

struct RenderOptions {
  double depth_noise_sigma = 0.0;      // meters, on ray depth
  double intensity_noise_sigma = 0.0;  // on [0, 1] intensity
  std::uint64_t seed = 0;
  double min_depth = 0.05;  // meters; closer hits are treated as invalid
};

struct RenderedFrame {
  ImageU16 depth;
  ImageU8 intensity;
};

/// Raycasts the scene through the pinhole model. Pixels with no surface hit
/// get depth 0 (invalid).
RenderedFrame render_frame(const SynthScene& scene, const CameraIntrinsics& intrinsics,
                           const Pose& pose, const RenderOptions& opts = {});

}  // namespace gmap
