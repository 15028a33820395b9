#include "run_config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gmap::cli {

namespace {

using nlohmann::ordered_json;

ordered_json sogmm_to_json(const SogmmConfig& c) {
  return ordered_json{{"bandwidth", c.bandwidth},
                      {"em_max_iters", c.em_max_iters},
                      {"em_tol", c.em_tol},
                      {"gbms_max_iters", c.gbms_max_iters},
                      {"gbms_shift_tol", c.gbms_shift_tol},
                      {"min_points_per_component", c.min_points_per_component}};
}

void sogmm_from_json(const ordered_json& j, SogmmConfig& c) {
  j.at("bandwidth").get_to(c.bandwidth);
  j.at("em_max_iters").get_to(c.em_max_iters);
  j.at("em_tol").get_to(c.em_tol);
  j.at("gbms_max_iters").get_to(c.gbms_max_iters);
  j.at("gbms_shift_tol").get_to(c.gbms_shift_tol);
  j.at("min_points_per_component").get_to(c.min_points_per_component);
}

ordered_json hash_to_json(const HashGridSpec& h) {
  return ordered_json{{"alpha", h.alpha},
                      {"extents", {h.extents[0], h.extents[1], h.extents[2]}}};
}

void hash_from_json(const ordered_json& j, HashGridSpec& h) {
  j.at("alpha").get_to(h.alpha);
  const auto& e = j.at("extents");
  if (!e.is_array() || e.size() != 3) throw std::runtime_error("config: extents must have 3 entries");
  for (int i = 0; i < 3; ++i) e[i].get_to(h.extents[i]);
}

ordered_json mapper_to_json(const MapperConfig& m) {
  ordered_json j{{"phi", nullptr},  // null = calibrate on the first fitted frame
                 {"phi_quantile", m.phi_quantile},
                 {"min_relevant_points", m.min_relevant_points},
                 {"cache_cap", m.cache_cap},
                 {"use_marginal", m.use_marginal},
                 {"use_submap", m.use_submap},
                 {"sogmm", sogmm_to_json(m.sogmm)},
                 {"hash", hash_to_json(m.hash)}};
  if (!std::isnan(m.phi)) j["phi"] = m.phi;
  return j;
}

void mapper_from_json(const ordered_json& j, MapperConfig& m) {
  const auto& phi = j.at("phi");
  m.phi = phi.is_null() ? std::numeric_limits<double>::quiet_NaN() : phi.get<double>();
  j.at("phi_quantile").get_to(m.phi_quantile);
  j.at("min_relevant_points").get_to(m.min_relevant_points);
  j.at("cache_cap").get_to(m.cache_cap);
  j.at("use_marginal").get_to(m.use_marginal);
  j.at("use_submap").get_to(m.use_submap);
  sogmm_from_json(j.at("sogmm"), m.sogmm);
  hash_from_json(j.at("hash"), m.hash);
}

ordered_json infer_to_json(const InferenceConfig& c) {
  return ordered_json{{"total_samples", c.total_samples},
                      {"batch_components", c.batch_components},
                      {"rng_seed", c.rng_seed},
                      {"exact_conditional", c.exact_conditional}};
}

void infer_from_json(const ordered_json& j, InferenceConfig& c) {
  j.at("total_samples").get_to(c.total_samples);
  j.at("batch_components").get_to(c.batch_components);
  j.at("rng_seed").get_to(c.rng_seed);
  j.at("exact_conditional").get_to(c.exact_conditional);
}

}  // namespace

void RunConfig::validate() const {
  mapper.validate();
  infer.validate();
  if (gt_voxel <= 0.0) throw std::invalid_argument("config: gt_voxel must be positive");
  if (dist_thresh <= 0.0) throw std::invalid_argument("config: dist_thresh must be positive");
  if (decimation < 1) throw std::invalid_argument("config: decimation must be >= 1");
  if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
}

std::string serialize_config(const RunConfig& cfg) {
  ordered_json j{{"mapper", mapper_to_json(cfg.mapper)},
                 {"infer", infer_to_json(cfg.infer)},
                 {"gt_voxel", cfg.gt_voxel},
                 {"dist_thresh", cfg.dist_thresh},
                 {"decimation", cfg.decimation},
                 {"threads", cfg.threads}};
  return j.dump(2) + "\n";
}

RunConfig parse_config(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  RunConfig cfg;
  mapper_from_json(j.at("mapper"), cfg.mapper);
  infer_from_json(j.at("infer"), cfg.infer);
  j.at("gt_voxel").get_to(cfg.gt_voxel);
  j.at("dist_thresh").get_to(cfg.dist_thresh);
  j.at("decimation").get_to(cfg.decimation);
  j.at("threads").get_to(cfg.threads);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config: " + path.string());
  os << serialize_config(cfg);
}

}  // namespace gmap::cli
