#include "gmap/synth.hpp"

#include "gmap/parallel.hpp"
#include "gmap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gmap {

namespace {

// Nearest hit distance along ray o + t*d, or infinity.
double raycast(const std::vector<Quad>& quads, const Vec3& o, const Vec3& d, double min_t) {
  double best = std::numeric_limits<double>::infinity();
  for (const Quad& q : quads) {
    const double dn = d[q.axis];
    if (std::abs(dn) < 1e-12) continue;
    const double t = (q.plane - o[q.axis]) / dn;
    if (t < min_t || t >= best) continue;
    const int a0 = (q.axis + 1) % 3;
    const int a1 = (q.axis + 2) % 3;
    int lo_axis = std::min(a0, a1);
    int hi_axis = std::max(a0, a1);
    const Vec3 p = o + t * d;
    if (p[lo_axis] < q.lo0 || p[lo_axis] > q.hi0 || p[hi_axis] < q.lo1 || p[hi_axis] > q.hi1) {
      continue;
    }
    best = t;
  }
  return best;
}

std::function<double(const Vec3&)> smooth_field(double bias) {
  return [bias](const Vec3& p) {
    const double v = bias + 0.2 * std::sin(std::numbers::pi * p.x() / 2.0) +
                     0.15 * std::cos(std::numbers::pi * p.y() / 1.5) +
                     0.08 * std::sin(std::numbers::pi * p.z());
    return std::clamp(v, 0.0, 1.0);
  };
}

}  // namespace

SynthScene make_room_scene(double lx, double ly, double lz) {
  SynthScene scene;
  scene.quads = {
      {0, 0.0, 0.0, ly, 0.0, lz},  // x = 0 wall (bounds: y then z)
      {0, lx, 0.0, ly, 0.0, lz},
      {1, 0.0, 0.0, lx, 0.0, lz},  // y = 0 wall (bounds: x then z)
      {1, ly, 0.0, lx, 0.0, lz},
      {2, 0.0, 0.0, lx, 0.0, ly},  // floor (bounds: x then y)
      {2, lz, 0.0, lx, 0.0, ly},
  };
  scene.intensity = smooth_field(0.55);
  return scene;
}

SynthScene make_wall_scene(double wall_y, double half_width, double height) {
  SynthScene scene;
  scene.quads = {
      {1, wall_y, -half_width, half_width, 0.0, height},
      {2, 0.0, -half_width, half_width, 0.0, wall_y + 1.0},
  };
  scene.intensity = smooth_field(0.5);
  return scene;
}

SynthScene make_corridor_scene(double length, double half_width, double height) {
  SynthScene scene;
  scene.quads = {
      {1, -half_width, 0.0, length, 0.0, height},
      {1, half_width, 0.0, length, 0.0, height},
      {2, 0.0, 0.0, length, -half_width, half_width},
      {2, height, 0.0, length, -half_width, half_width},
      {0, 0.0, -half_width, half_width, 0.0, height},
      {0, length, -half_width, half_width, 0.0, height},
  };
  scene.intensity = smooth_field(0.5);
  return scene;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) {
    throw std::invalid_argument("look_at: view direction parallel to up");
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

RenderedFrame render_frame(const SynthScene& scene, const CameraIntrinsics& intrinsics,
                           const Pose& pose, const RenderOptions& opts) {
  intrinsics.validate();
  RenderedFrame frame;
  frame.depth.width = frame.intensity.width = intrinsics.width;
  frame.depth.height = frame.intensity.height = intrinsics.height;
  const std::size_t count =
      static_cast<std::size_t>(intrinsics.width) * static_cast<std::size_t>(intrinsics.height);
  frame.depth.pixels.assign(count, 0);
  frame.intensity.pixels.assign(count, 0);

  const CounterRng rng{opts.seed};
  parallel_for(static_cast<std::size_t>(intrinsics.height), [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      for (int u = 0; u < intrinsics.width; ++u) {
        const Vec3 dir_sensor((u - intrinsics.cx) / intrinsics.fx,
                              (static_cast<int>(v) - intrinsics.cy) / intrinsics.fy, 1.0);
        const Vec3 dir_world = pose.rotation * dir_sensor;
        const double t = raycast(scene.quads, pose.translation, dir_world, opts.min_depth);
        if (!std::isfinite(t)) continue;

        const std::uint64_t pix =
            v * static_cast<std::size_t>(intrinsics.width) + static_cast<std::size_t>(u);
        // z-depth equals t because the sensor-frame ray has unit z.
        double depth = t;
        if (opts.depth_noise_sigma > 0.0) {
          depth += opts.depth_noise_sigma * rng.normal(2 * pix);
        }
        const double raw = std::round(depth * intrinsics.depth_scale);
        if (raw < 1.0 || raw > 65535.0) continue;

        const Vec3 hit = pose.translation + t * dir_world;
        double intensity = scene.intensity ? scene.intensity(hit) : 0.5;
        if (opts.intensity_noise_sigma > 0.0) {
          intensity += opts.intensity_noise_sigma * rng.normal(2 * pix + 1);
        }
        intensity = std::clamp(intensity, 0.0, 1.0);

        frame.depth.pixels[pix] = static_cast<std::uint16_t>(raw);
        frame.intensity.pixels[pix] = static_cast<std::uint8_t>(std::lround(intensity * 255.0));
      }
    }
  });
  return frame;
}

}  // namespace gmap
