#include "gmap/mapper.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace gmap {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void MapperConfig::validate() const {
  if (min_relevant_points < 1) {
    throw std::invalid_argument("MapperConfig: min_relevant_points must be >= 1");
  }
  if (phi_quantile < 0.0 || phi_quantile > 1.0) {
    throw std::invalid_argument("MapperConfig: phi_quantile must be in [0, 1]");
  }
  sogmm.validate();
  hash.validate();
}

void merge_global(Gmm4& global, const Gmm4& local) {
  validate_gmm<4>(local);
  if (global.empty()) {
    global = local;
    return;
  }
  const double n_g = static_cast<double>(global.support_count);
  const double n_l = static_cast<double>(local.support_count);
  const double total = n_g + n_l;
  for (auto& c : global.components) c.weight *= n_g / total;
  for (const auto& c : local.components) {
    auto appended = c;
    appended.weight *= n_l / total;
    global.components.push_back(appended);
  }
  global.support_count += local.support_count;
}

double calibrate_phi(const Gmm4& model, const MultimodalCloud& held_in_frame, double quantile,
                     bool use_marginal) {
  if (held_in_frame.empty()) throw std::invalid_argument("calibrate_phi: empty frame");
  Eigen::VectorXd scores;
  if (use_marginal) {
    const Eigen::Matrix<double, Eigen::Dynamic, 3> pts = held_in_frame.xyz();
    scores = gmm_log_likelihood<3>(pts, marginalize_spatial(model));
  } else {
    scores = gmm_log_likelihood<4>(held_in_frame.pts, model);
  }
  std::vector<double> sorted(scores.data(), scores.data() + scores.size());
  std::sort(sorted.begin(), sorted.end());
  const auto idx = std::min<std::size_t>(
      sorted.size() - 1, static_cast<std::size_t>(quantile * static_cast<double>(sorted.size())));
  return sorted[idx];
}

Mapper::Mapper(const MapperConfig& cfg) : cfg_(cfg), table_(cfg.hash), phi_(cfg.phi) {
  cfg_.validate();
}

RelevantResult Mapper::relevant_subset(const MultimodalCloud& frame) const {
  RelevantResult res;
  if (global_.empty()) {
    res.model_uninitialized = true;
    res.indices.resize(static_cast<std::size_t>(frame.size()));
    std::iota(res.indices.begin(), res.indices.end(), Eigen::Index{0});
    return res;
  }

  const Eigen::Matrix<double, Eigen::Dynamic, 3> pts3 = frame.xyz();

  std::vector<std::uint32_t> submap;
  const std::vector<std::uint32_t>* subset = nullptr;
  if (cfg_.use_submap) {
    submap = table_.query_submap(pts3);
    res.submap_size = submap.size();
    if (submap.empty()) {
      // Nothing hashed near this frame: unexplored region, everything is new.
      res.indices.resize(static_cast<std::size_t>(frame.size()));
      std::iota(res.indices.begin(), res.indices.end(), Eigen::Index{0});
      return res;
    }
    subset = &submap;
  }

  Eigen::VectorXd scores;
  if (cfg_.use_marginal) {
    scores = gmm_log_likelihood<3>(pts3, marginalize_spatial(global_), subset);
  } else {
    scores = gmm_log_likelihood<4>(frame.pts, global_, subset);
  }

  const double phi = phi_;
  for (Eigen::Index n = 0; n < frame.size(); ++n) {
    if (!std::isfinite(phi) || scores[n] < phi) res.indices.push_back(n);
  }
  return res;
}

FrameReport Mapper::process_frame(const MultimodalCloud& frame,
                                  const std::vector<double>& depths) {
  if (static_cast<Eigen::Index>(depths.size()) != frame.size()) {
    throw std::invalid_argument("process_frame: depth list size mismatch");
  }
  FrameReport report;
  report.frame_id = frame_counter_++;
  report.n_points = static_cast<std::size_t>(frame.size());

  const auto t0 = std::chrono::steady_clock::now();
  const RelevantResult rel = relevant_subset(frame);
  report.t_relevant_s = seconds_since(t0);
  report.n_submap = rel.submap_size;

  // Z^r plus whatever earlier frames left behind.
  MultimodalCloud candidate(static_cast<Eigen::Index>(rel.indices.size()));
  std::vector<double> candidate_depths(rel.indices.size());
  for (std::size_t i = 0; i < rel.indices.size(); ++i) {
    candidate.pts.row(static_cast<Eigen::Index>(i)) = frame.pts.row(rel.indices[i]);
    candidate_depths[i] = depths[static_cast<std::size_t>(rel.indices[i])];
  }
  candidate.append(cache_);
  candidate_depths.insert(candidate_depths.end(), cache_depths_.begin(), cache_depths_.end());
  report.n_relevant = static_cast<std::size_t>(candidate.size());

  const bool over_threshold =
      candidate.size() > static_cast<Eigen::Index>(cfg_.min_relevant_points);
  const bool cache_overflow = candidate.size() > static_cast<Eigen::Index>(cfg_.cache_cap);

  if (!candidate.empty() && (over_threshold || cache_overflow)) {
    Gmm4 local;
    try {
      const auto t_fit = std::chrono::steady_clock::now();
      local = fit_sogmm(candidate, candidate_depths, cfg_.sogmm);
      report.t_fit_s = seconds_since(t_fit);
    } catch (const std::exception& e) {
      report.error = e.what();
      report.cached = true;
      cache_ = std::move(candidate);
      cache_depths_ = std::move(candidate_depths);
      report.n_components = global_.size();
      return report;
    }

    const auto t_merge = std::chrono::steady_clock::now();
    const auto k_before = static_cast<std::uint32_t>(global_.size());
    merge_global(global_, local);
    for (std::uint32_t j = 0; j < local.size(); ++j) {
      table_.insert_component(k_before + j, local.components[j]);
    }
    report.t_merge_s = seconds_since(t_merge);
    report.fitted = true;
    cache_ = MultimodalCloud();
    cache_depths_.clear();

    if (!std::isfinite(phi_)) {
      phi_ = calibrate_phi(global_, frame, cfg_.phi_quantile, cfg_.use_marginal);
    }
  } else {
    report.cached = true;
    cache_ = std::move(candidate);
    cache_depths_ = std::move(candidate_depths);
  }

  report.n_components = global_.size();
  return report;
}

}  // namespace gmap
