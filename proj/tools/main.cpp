#include "run_config.hpp"

#include "gmap/eval.hpp"
#include "gmap/infer.hpp"
#include "gmap/io.hpp"
#include "gmap/mapper.hpp"
#include "gmap/parallel.hpp"
#include "gmap/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gmap::cli {
namespace {

using nlohmann::ordered_json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string report_line(const FrameReport& r) {
  ordered_json j{{"frame", r.frame_id},
                 {"points", r.n_points},
                 {"relevant", r.n_relevant},
                 {"submap", r.n_submap},
                 {"components", r.n_components},
                 {"fitted", r.fitted},
                 {"cached", r.cached},
                 {"t_relevant_s", r.t_relevant_s},
                 {"t_fit_s", r.t_fit_s},
                 {"t_merge_s", r.t_merge_s}};
  if (!r.error.empty()) j["error"] = r.error;
  return j.dump();
}

struct LoadedFrame {
  MultimodalCloud world;          // world-frame 4D points
  std::vector<double> depths;     // per-point metric depth
};

LoadedFrame load_world_frame(const Manifest& manifest, std::size_t index, int decimation) {
  const auto& f = manifest.frames[index];
  const auto depth = load_pgm16(f.depth_path);
  const auto intensity = load_pgm8(f.intensity_path);
  auto [cloud, depths] = load_frame(depth, intensity, manifest.intrinsics, decimation);
  return {transform_cloud(cloud, f.pose), std::move(depths)};
}

MultimodalCloud manifest_ground_truth(const Manifest& manifest, const RunConfig& cfg) {
  std::vector<MultimodalCloud> clouds;
  clouds.reserve(manifest.frames.size());
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    clouds.push_back(load_world_frame(manifest, i, cfg.decimation).world);
  }
  return build_ground_truth(clouds, cfg.gt_voxel);
}

RunConfig resolve_config(const std::string& config_path) {
  if (config_path.empty()) return RunConfig{};
  return load_config(config_path);
}

void apply_threads(const RunConfig& cfg) {
  if (cfg.threads > 0) set_max_threads(cfg.threads);
}

int cmd_init_config(const std::string& out_path) {
  const RunConfig defaults;
  if (out_path.empty() || out_path == "-") {
    std::cout << serialize_config(defaults);
  } else {
    save_config(defaults, out_path);
  }
  return 0;
}

int cmd_map(const std::string& manifest_path, const std::string& config_path,
            const std::string& out_model, const std::string& report_path) {
  const RunConfig cfg = resolve_config(config_path);
  apply_threads(cfg);
  const Manifest manifest = load_manifest(manifest_path);
  if (manifest.frames.empty()) {
    std::cerr << "map: manifest has no frames\n";
    return 1;
  }

  std::ofstream report_file;
  std::ostream* report = &std::cout;
  if (!report_path.empty()) {
    report_file.open(report_path);
    if (!report_file) {
      std::cerr << "map: cannot write report: " << report_path << "\n";
      return 1;
    }
    report = &report_file;
  }

  Mapper mapper(cfg.mapper);
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    auto frame = load_world_frame(manifest, i, cfg.decimation);
    const FrameReport r = mapper.process_frame(frame.world, frame.depths);
    *report << report_line(r) << "\n";
  }

  save_model(mapper.global(), out_model);
  std::cerr << "map: " << manifest.frames.size() << " frames, " << mapper.global().size()
            << " components -> " << out_model << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& model_path, const std::string& config_path,
                    const std::string& out_ply, std::int64_t samples_override) {
  RunConfig cfg = resolve_config(config_path);
  apply_threads(cfg);
  if (samples_override >= 0) cfg.infer.total_samples = static_cast<std::uint64_t>(samples_override);
  const Gmm4 model = load_model(model_path);
  const MultimodalCloud cloud = reconstruct(model, cfg.infer);
  export_ply(cloud, out_ply);
  std::cerr << "reconstruct: " << cloud.size() << " points -> " << out_ply << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& ply_path,
             const std::string& manifest_path, const std::string& config_path,
             const std::string& gt_out) {
  const RunConfig cfg = resolve_config(config_path);
  apply_threads(cfg);
  const Manifest manifest = load_manifest(manifest_path);
  const MultimodalCloud gt = manifest_ground_truth(manifest, cfg);
  if (!gt_out.empty()) export_ply(gt, gt_out);

  std::vector<ReportRow> rows;
  if (!model_path.empty()) {
    const Gmm4 model = load_model(model_path);
    const MultimodalCloud pred = reconstruct(model, cfg.infer);
    ReconstructionReport r = compute_metrics(pred, gt, cfg.dist_thresh);
    r.model_bytes = model_bytes(model);
    rows.push_back({"model", std::to_string(model.size()) + " comp", r});
  } else {
    const MultimodalCloud pred = import_ply(ply_path);
    ReconstructionReport r = compute_metrics(pred, gt, cfg.dist_thresh);
    rows.push_back({"ply", std::to_string(pred.size()) + " pts", r});
  }
  std::cout << format_report_table(rows);
  return 0;
}

int cmd_bench(const std::string& manifest_path, const std::string& config_path,
              const std::vector<double>& alphas) {
  const RunConfig base = resolve_config(config_path);
  apply_threads(base);
  const Manifest manifest = load_manifest(manifest_path);

  for (double alpha : alphas) {
    MapperConfig mc = base.mapper;
    mc.hash.alpha = alpha;
    Mapper mapper(mc);

    double sum_full = 0.0, sum_sub = 0.0, sum_b = 0.0;
    std::size_t timed_frames = 0;
    for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
      auto frame = load_world_frame(manifest, i, base.decimation);

      if (mapper.initialized()) {
        const Eigen::Matrix<double, Eigen::Dynamic, 3> xyz = frame.world.xyz();
        // paired timing of the full-K and submap-B scoring paths on the same
        // model state, min over repeats to shed scheduler noise
        double best_full = std::numeric_limits<double>::infinity();
        double best_sub = best_full;
        std::size_t submap_size = 0;
        for (int rep = 0; rep < 3; ++rep) {
          auto t0 = std::chrono::steady_clock::now();
          const Gmm3 marginal = marginalize_spatial(mapper.global());
          volatile double sink = gmm_log_likelihood<3>(xyz, marginal).sum();
          (void)sink;
          best_full = std::min(best_full, seconds_since(t0));

          t0 = std::chrono::steady_clock::now();
          const auto submap = mapper.table().query_submap(xyz);
          if (!submap.empty()) {
            const Gmm3 marginal_sub = marginalize_spatial(mapper.global());
            volatile double sink2 = gmm_log_likelihood<3>(xyz, marginal_sub, &submap).sum();
            (void)sink2;
          }
          best_sub = std::min(best_sub, seconds_since(t0));
          submap_size = submap.size();
        }
        sum_full += best_full;
        sum_sub += best_sub;
        sum_b += static_cast<double>(submap_size);
        ++timed_frames;

        ordered_json line{{"alpha", alpha},
                          {"frame", i},
                          {"components", mapper.global().size()},
                          {"submap", submap_size},
                          {"t_full_s", best_full},
                          {"t_submap_s", best_sub},
                          {"cum_ratio", sum_full / sum_sub}};
        std::cout << line.dump() << "\n";
      }

      mapper.process_frame(frame.world, frame.depths);
    }

    ordered_json summary{{"alpha", alpha},
                         {"summary", true},
                         {"components", mapper.global().size()},
                         {"mean_submap", timed_frames ? sum_b / timed_frames : 0.0},
                         {"cum_ratio", sum_sub > 0.0 ? sum_full / sum_sub : 0.0}};
    std::cout << summary.dump() << "\n";
  }
  return 0;
}

SynthScene scene_by_name(const std::string& name) {
  if (name == "room") return make_room_scene();
  if (name == "wall") return make_wall_scene();
  if (name == "corridor") return make_corridor_scene();
  throw CLI::ValidationError("scene must be room, wall or corridor");
}

/// Head-on poses covering every face of the closed room exactly: the pixel
/// frustum reaches +-(cx/fx)*d horizontally and +-(cy/fy)*d vertically at
/// standoff d, so standoff and tile centers are solved per face pair to end
/// coverage at the face boundary. Frames that stop at the boundary never
/// image two faces at once, which keeps each local fit on a single plane.
std::vector<Pose> room_coverage_poses(double lx, double ly, double lz,
                                      const CameraIntrinsics& intr) {
  const double reach_h = intr.cx / intr.fx;  // per unit standoff
  const double reach_v = intr.cy / intr.fy;

  // Solves one face: vertical rows fix the standoff, columns fill the rest.
  auto face_tiles = [&](double len_h, double len_v, double depth,
                        const std::function<Pose(double c_h, double c_v, double d)>& pose) {
    std::vector<Pose> out;
    for (int rows = 1;; ++rows) {
      const double d = len_v / (2.0 * reach_v * rows);
      if (d > depth - 0.05) continue;          // camera would leave the room
      if (2.0 * reach_h * d > len_h) continue; // tile wider than the face
      const double rh = reach_h * d;
      const double rv = reach_v * d;
      const int cols = static_cast<int>(std::ceil(len_h / (2.0 * rh) - 1e-9));
      for (int r = 0; r < rows; ++r) {
        const double c_v = rv + 2.0 * rv * r;
        for (int c = 0; c < cols; ++c) {
          const double c_h =
              cols == 1 ? len_h / 2.0 : rh + (len_h - 2.0 * rh) * c / (cols - 1);
          out.push_back(pose(c_h, c_v, d));
        }
      }
      return out;
    }
  };

  std::vector<Pose> poses;
  auto add = [&](std::vector<Pose> p) {
    poses.insert(poses.end(), p.begin(), p.end());
  };
  // walls x = 0 and x = lx: horizontal axis y, vertical axis z
  add(face_tiles(ly, lz, lx, [&](double y, double z, double d) {
    return look_at(Vec3(d, y, z), Vec3(0, y, z));
  }));
  add(face_tiles(ly, lz, lx, [&](double y, double z, double d) {
    return look_at(Vec3(lx - d, y, z), Vec3(lx, y, z));
  }));
  // walls y = 0 and y = ly: horizontal axis x, vertical axis z
  add(face_tiles(lx, lz, ly, [&](double x, double z, double d) {
    return look_at(Vec3(x, d, z), Vec3(x, 0, z));
  }));
  add(face_tiles(lx, lz, ly, [&](double x, double z, double d) {
    return look_at(Vec3(x, ly - d, z), Vec3(x, ly, z));
  }));
  // floor and ceiling: with up = +x the image is horizontal along y,
  // vertical along x
  add(face_tiles(ly, lx, lz, [&](double y, double x, double d) {
    return look_at(Vec3(x, y, d), Vec3(x, y, 0), Vec3(1, 0, 0));
  }));
  add(face_tiles(ly, lx, lz, [&](double y, double x, double d) {
    return look_at(Vec3(x, y, lz - d), Vec3(x, y, lz), Vec3(1, 0, 0));
  }));
  return poses;
}

std::vector<Pose> synth_trajectory(const std::string& scene_name, int frames,
                                   const CameraIntrinsics& intr) {
  std::vector<Pose> poses;
  if (scene_name == "corridor") {
    // walk down the corridor looking at the right-hand wall
    for (int f = 0; f < frames; ++f) {
      const double x = 0.8 + 22.0 * f / frames;
      poses.push_back(look_at(Vec3(x, 0.2, 1.25), Vec3(x + 0.2, 1.0, 1.25)));
    }
  } else if (scene_name == "wall") {
    // lateral sweep across the wall
    for (int f = 0; f < frames; ++f) {
      const double x = frames == 1 ? 0.0 : -2.0 + 4.0 * f / (frames - 1);
      poses.push_back(look_at(Vec3(x, 0.5, 1.25), Vec3(x, 2.0, 1.25)));
    }
  } else {
    poses = room_coverage_poses(4.0, 3.0, 2.5, intr);
    if (frames > 0 && static_cast<std::size_t>(frames) < poses.size()) {
      poses.resize(frames);
    }
  }
  return poses;
}

int cmd_synth(const std::string& scene_name, const std::string& out_dir, int frames,
              double depth_noise, double intensity_noise, std::uint64_t seed,
              const CameraIntrinsics& intr) {
  const SynthScene scene = scene_by_name(scene_name);
  const std::vector<Pose> poses = synth_trajectory(scene_name, frames, intr);

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  Manifest manifest;
  manifest.intrinsics = intr;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    RenderOptions opts;
    opts.depth_noise_sigma = depth_noise;
    opts.intensity_noise_sigma = intensity_noise;
    opts.seed = seed + i;
    const RenderedFrame frame = render_frame(scene, intr, poses[i], opts);

    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu", i);
    const std::string depth_name = std::string(name) + "_depth.pgm";
    const std::string gray_name = std::string(name) + "_gray.pgm";
    save_pgm16(frame.depth, dir / depth_name);
    save_pgm8(frame.intensity, dir / gray_name);
    manifest.frames.push_back({dir / depth_name, dir / gray_name, poses[i]});
  }
  save_manifest(manifest, dir / "manifest.txt");
  std::cerr << "synth: " << poses.size() << " frames -> " << (dir / "manifest.txt").string()
            << "\n";
  return 0;
}

// TUM RGB-D trajectory line: timestamp tx ty tz qx qy qz qw
std::optional<Pose> parse_tum_pose(const std::string& line, double& stamp) {
  std::istringstream ss(line);
  double tx, ty, tz, qx, qy, qz, qw;
  if (!(ss >> stamp >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) return std::nullopt;
  Pose pose;
  pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
  pose.translation = Vec3(tx, ty, tz);
  return pose;
}

int cmd_convert(const std::string& trajectory_path, const std::string& depth_list,
                const std::string& gray_list, const std::string& out_manifest,
                const CameraIntrinsics& intr) {
  auto read_lines = [](const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line[0] != '#') lines.push_back(line);
    }
    return lines;
  };

  const auto depth_paths = read_lines(depth_list);
  const auto gray_paths = read_lines(gray_list);
  const auto traj_lines = read_lines(trajectory_path);

  std::vector<Pose> poses;
  for (const auto& line : traj_lines) {
    double stamp;
    if (auto pose = parse_tum_pose(line, stamp)) poses.push_back(*pose);
  }
  const std::size_t n = std::min({depth_paths.size(), gray_paths.size(), poses.size()});
  if (n == 0) {
    std::cerr << "convert: no usable frames\n";
    return 1;
  }
  if (depth_paths.size() != gray_paths.size() || depth_paths.size() != poses.size()) {
    std::cerr << "convert: list lengths differ (depth " << depth_paths.size() << ", gray "
              << gray_paths.size() << ", poses " << poses.size() << "); using first " << n
              << "\n";
  }

  // list entries are taken relative to the list file they came from
  const auto depth_base = std::filesystem::path(depth_list).parent_path();
  const auto gray_base = std::filesystem::path(gray_list).parent_path();
  Manifest manifest;
  manifest.intrinsics = intr;
  for (std::size_t i = 0; i < n; ++i) {
    manifest.frames.push_back({depth_base / depth_paths[i], gray_base / gray_paths[i], poses[i]});
  }
  save_manifest(manifest, out_manifest);
  std::cerr << "convert: " << n << " frames -> " << out_manifest << "\n";
  return 0;
}

void add_intrinsics_flags(CLI::App* cmd, CameraIntrinsics& intr) {
  cmd->add_option("--fx", intr.fx, "focal length x, pixels");
  cmd->add_option("--fy", intr.fy, "focal length y, pixels");
  cmd->add_option("--cx", intr.cx, "principal point x, pixels");
  cmd->add_option("--cy", intr.cy, "principal point y, pixels");
  cmd->add_option("--width", intr.width, "image width, pixels");
  cmd->add_option("--height", intr.height, "image height, pixels");
  cmd->add_option("--depth-scale", intr.depth_scale, "raw depth units per meter");
}

int run(int argc, char** argv) {
  CLI::App app{"incremental multimodal surface mapping pipeline"};
  app.require_subcommand(1);

  // init-config
  std::string out_path;
  auto* init = app.add_subcommand("init-config", "write a config file with full defaults");
  init->add_option("output", out_path, "output path, or - for stdout");

  // map
  std::string manifest_path, config_path, model_path, report_path;
  auto* map = app.add_subcommand("map", "run incremental mapping over a manifest");
  map->add_option("--manifest", manifest_path, "frame manifest")->required();
  map->add_option("--config", config_path, "config file (defaults when omitted)");
  map->add_option("--out", model_path, "output model file")->required();
  map->add_option("--report", report_path, "frame report file (stdout when omitted)");

  // reconstruct
  std::string rc_model, rc_config, rc_out;
  std::int64_t rc_samples = -1;
  auto* rc = app.add_subcommand("reconstruct", "sample a dense cloud from a model");
  rc->add_option("--model", rc_model, "model file")->required();
  rc->add_option("--config", rc_config, "config file");
  rc->add_option("--out", rc_out, "output PLY")->required();
  rc->add_option("--samples", rc_samples, "overrides infer.total_samples");

  // eval
  std::string ev_model, ev_ply, ev_manifest, ev_config, ev_gt_out;
  auto* ev = app.add_subcommand("eval", "score a model or PLY against manifest ground truth");
  auto* ev_model_opt = ev->add_option("--model", ev_model, "model file");
  ev->add_option("--ply", ev_ply, "predicted PLY")->excludes(ev_model_opt);
  ev->add_option("--manifest", ev_manifest, "frame manifest")->required();
  ev->add_option("--config", ev_config, "config file");
  ev->add_option("--gt-out", ev_gt_out, "also write the ground-truth cloud as PLY");

  // bench
  std::string be_manifest, be_config;
  std::vector<double> be_alphas{0.2};
  auto* be = app.add_subcommand("bench", "time full-K vs submap-B scoring over a manifest");
  be->add_option("--manifest", be_manifest, "frame manifest")->required();
  be->add_option("--config", be_config, "config file");
  be->add_option("--alpha", be_alphas, "hash cell sizes to sweep")->expected(-1);

  // synth
  std::string sy_scene = "room", sy_out;
  int sy_frames = 0;  // 0 = scene default
  double sy_depth_noise = 0.005, sy_intensity_noise = 0.0;
  std::uint64_t sy_seed = 0;
  CameraIntrinsics sy_intr{64, 64, 63.5, 47.5, 128, 96, 1000.0};
  auto* sy = app.add_subcommand("synth", "render a synthetic scene into frames + manifest");
  sy->add_option("--scene", sy_scene, "room, wall or corridor");
  sy->add_option("--out", sy_out, "output directory")->required();
  sy->add_option("--frames", sy_frames, "frame count (0 = scene default)");
  sy->add_option("--depth-noise", sy_depth_noise, "depth noise sigma, meters");
  sy->add_option("--intensity-noise", sy_intensity_noise, "intensity noise sigma");
  sy->add_option("--seed", sy_seed, "render rng seed");
  add_intrinsics_flags(sy, sy_intr);

  // convert
  std::string cv_traj, cv_depth, cv_gray, cv_out;
  CameraIntrinsics cv_intr;
  auto* cv = app.add_subcommand("convert", "build a manifest from a TUM-style trajectory");
  cv->add_option("--trajectory", cv_traj, "timestamp tx ty tz qx qy qz qw lines")->required();
  cv->add_option("--depth-list", cv_depth, "file listing depth PGM paths")->required();
  cv->add_option("--gray-list", cv_gray, "file listing intensity PGM paths")->required();
  cv->add_option("--out", cv_out, "output manifest")->required();
  add_intrinsics_flags(cv, cv_intr);

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) return cmd_init_config(out_path);
    if (map->parsed()) return cmd_map(manifest_path, config_path, model_path, report_path);
    if (rc->parsed()) return cmd_reconstruct(rc_model, rc_config, rc_out, rc_samples);
    if (ev->parsed()) {
      if (ev_model.empty() && ev_ply.empty()) {
        std::cerr << "eval: need --model or --ply\n";
        return 1;
      }
      return cmd_eval(ev_model, ev_ply, ev_manifest, ev_config, ev_gt_out);
    }
    if (be->parsed()) return cmd_bench(be_manifest, be_config, be_alphas);
    if (sy->parsed()) {
      return cmd_synth(sy_scene, sy_out, sy_frames, sy_depth_noise, sy_intensity_noise, sy_seed,
                       sy_intr);
    }
    if (cv->parsed()) return cmd_convert(cv_traj, cv_depth, cv_gray, cv_out, cv_intr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace gmap::cli

int main(int argc, char** argv) { return gmap::cli::run(argc, argv); }
