#include "gmap/sogmm.hpp"

#include "gmap/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace gmap {

void SogmmConfig::validate() const {
  if (bandwidth <= 0.0) throw std::invalid_argument("SogmmConfig: bandwidth must be > 0");
  if (em_tol <= 0.0) throw std::invalid_argument("SogmmConfig: em_tol must be > 0");
  if (em_max_iters < 1 || gbms_max_iters < 1) {
    throw std::invalid_argument("SogmmConfig: iteration caps must be >= 1");
  }
  if (min_points_per_component < 1) {
    throw std::invalid_argument("SogmmConfig: min_points_per_component must be >= 1");
  }
}

namespace {

std::int64_t cell_key(int ix, int iy) {
  return (static_cast<std::int64_t>(ix) << 32) ^ static_cast<std::int64_t>(static_cast<std::uint32_t>(iy));
}

// Bin index along one axis for the bandwidth grid.
int bin_of(double v, double h) { return static_cast<int>(std::floor(v / h)); }

struct FeatureGrid {
  double h;
  std::unordered_map<std::int64_t, std::vector<int>> cells;

  FeatureGrid(const Eigen::Matrix<double, Eigen::Dynamic, 2>& f, double bandwidth) : h(bandwidth) {
    for (Eigen::Index n = 0; n < f.rows(); ++n) {
      cells[cell_key(bin_of(f(n, 0), h), bin_of(f(n, 1), h))].push_back(static_cast<int>(n));
    }
  }

  // Visits every feature index within the 3x3 cell neighborhood of p.
  template <typename Fn>
  void for_neighborhood(const Eigen::Vector2d& p, Fn&& fn) const {
    const int cx = bin_of(p.x(), h);
    const int cy = bin_of(p.y(), h);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        auto it = cells.find(cell_key(cx + dx, cy + dy));
        if (it == cells.end()) continue;
        for (int idx : it->second) fn(idx);
      }
    }
  }
};

}  // namespace

GbmsResult gbms_mode_count(const Eigen::Matrix<double, Eigen::Dynamic, 2>& features,
                           const SogmmConfig& cfg) {
  cfg.validate();
  if (features.rows() == 0) throw std::invalid_argument("gbms_mode_count: empty feature set");
  if (!features.allFinite()) throw std::invalid_argument("gbms_mode_count: non-finite feature");

  const double h = cfg.bandwidth;
  const double h2 = h * h;
  const FeatureGrid grid(features, h);

  // Seeds at the centers of occupied bandwidth cells, in deterministic order.
  std::vector<std::int64_t> occupied;
  occupied.reserve(grid.cells.size());
  for (const auto& [key, _] : grid.cells) occupied.push_back(key);
  std::sort(occupied.begin(), occupied.end());

  Eigen::Matrix<double, Eigen::Dynamic, 2> seeds(static_cast<Eigen::Index>(occupied.size()), 2);
  for (Eigen::Index s = 0; s < seeds.rows(); ++s) {
    const std::int64_t key = occupied[static_cast<std::size_t>(s)];
    const int ix = static_cast<int>(key >> 32);
    const int iy = static_cast<int>(static_cast<std::int32_t>(key & 0xffffffff));
    seeds(s, 0) = (ix + 0.5) * h;
    seeds(s, 1) = (iy + 0.5) * h;
  }

  const double tol2 = cfg.shift_tol() * cfg.shift_tol();
  std::vector<char> converged(static_cast<std::size_t>(seeds.rows()), 0);
  for (int iter = 0; iter < cfg.gbms_max_iters; ++iter) {
    std::atomic<bool> any_moved{false};
    parallel_for(static_cast<std::size_t>(seeds.rows()), [&](std::size_t begin, std::size_t end) {
      for (std::size_t s = begin; s < end; ++s) {
        if (converged[s]) continue;
        const Eigen::Vector2d p = seeds.row(static_cast<Eigen::Index>(s)).transpose();
        Eigen::Vector2d num = Eigen::Vector2d::Zero();
        double den = 0.0;
        grid.for_neighborhood(p, [&](int idx) {
          const Eigen::Vector2d f = features.row(idx).transpose();
          const double d2 = (f - p).squaredNorm();
          if (d2 > h2) return;
          const double w = std::exp(-0.5 * d2 / h2);
          num += w * f;
          den += w;
        });
        if (den <= 0.0) {
          converged[s] = 1;  // seed drifted away from all data; freeze it
          continue;
        }
        const Eigen::Vector2d next = num / den;
        if ((next - p).squaredNorm() < tol2) {
          converged[s] = 1;
        } else {
          any_moved.store(true, std::memory_order_relaxed);
        }
        seeds.row(static_cast<Eigen::Index>(s)) = next.transpose();
      }
    });
    if (!any_moved.load()) break;
  }

  // Single-link merge of converged seeds within bandwidth/2.
  const double merge2 = 0.25 * h2;
  const Eigen::Index m = seeds.rows();
  std::vector<int> parent(static_cast<std::size_t>(m));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a + 1; b < m; ++b) {
      if ((seeds.row(a) - seeds.row(b)).squaredNorm() <= merge2) {
        const int ra = find(static_cast<int>(a));
        const int rb = find(static_cast<int>(b));
        if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
      }
    }
  }

  std::unordered_map<int, int> root_to_mode;
  std::vector<Eigen::Vector2d> sums;
  std::vector<int> counts;
  for (Eigen::Index s = 0; s < m; ++s) {
    const int r = find(static_cast<int>(s));
    auto [it, inserted] = root_to_mode.try_emplace(r, static_cast<int>(sums.size()));
    if (inserted) {
      sums.push_back(Eigen::Vector2d::Zero());
      counts.push_back(0);
    }
    sums[static_cast<std::size_t>(it->second)] += seeds.row(s).transpose();
    counts[static_cast<std::size_t>(it->second)] += 1;
  }

  GbmsResult res;
  res.mode_count = static_cast<int>(sums.size());
  res.modes.resize(res.mode_count, 2);
  for (int j = 0; j < res.mode_count; ++j) {
    res.modes.row(j) = (sums[static_cast<std::size_t>(j)] / counts[static_cast<std::size_t>(j)]).transpose();
  }

  res.assignments.resize(static_cast<std::size_t>(features.rows()));
  parallel_for(static_cast<std::size_t>(features.rows()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const Eigen::Vector2d f = features.row(static_cast<Eigen::Index>(n)).transpose();
      int best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int j = 0; j < res.mode_count; ++j) {
        const double d2 = (res.modes.row(j).transpose() - f).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = j;
        }
      }
      res.assignments[n] = best;
    }
  });
  return res;
}

ResponsibilityMatrix kinit_responsibilities(const std::vector<int>& assignments, int mode_count) {
  if (mode_count < 1) throw std::invalid_argument("kinit_responsibilities: mode_count < 1");
  std::vector<Eigen::Index> members(static_cast<std::size_t>(mode_count), 0);
  for (int a : assignments) {
    if (a < 0 || a >= mode_count) throw std::out_of_range("kinit_responsibilities: bad assignment");
    members[static_cast<std::size_t>(a)] += 1;
  }

  ResponsibilityMatrix out;
  std::vector<int> column(static_cast<std::size_t>(mode_count), -1);
  int kept = 0;
  for (int j = 0; j < mode_count; ++j) {
    if (members[static_cast<std::size_t>(j)] > 0) {
      column[static_cast<std::size_t>(j)] = kept++;
    } else {
      out.dropped_modes.push_back(j);
    }
  }

  out.gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(assignments.size()), kept);
  for (std::size_t n = 0; n < assignments.size(); ++n) {
    out.gamma(static_cast<Eigen::Index>(n), column[static_cast<std::size_t>(assignments[n])]) = 1.0;
  }
  return out;
}

namespace {

// M-step: responsibility-weighted moments with diagonal loading.
Gmm4 m_step(const Eigen::Matrix<double, Eigen::Dynamic, 4>& pts, const Eigen::MatrixXd& gamma) {
  const Eigen::Index n = pts.rows();
  const Eigen::Index j_count = gamma.cols();
  const Eigen::VectorXd nk = gamma.colwise().sum();

  Gmm4 model;
  model.components.resize(static_cast<std::size_t>(j_count));
  parallel_for(static_cast<std::size_t>(j_count), [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      const Eigen::Index bj = static_cast<Eigen::Index>(b);
      auto& c = model.components[b];
      c.weight = nk[bj] / static_cast<double>(n);
      c.mean = (gamma.col(bj).transpose() * pts).transpose() / nk[bj];
      const Eigen::Matrix<double, Eigen::Dynamic, 4> centered = pts.rowwise() - c.mean.transpose();
      c.cov = (centered.transpose() * (centered.array().colwise() * gamma.col(bj).array()).matrix()) / nk[bj];
      c.cov = 0.5 * (c.cov + c.cov.transpose());
      c.cov.diagonal().array() += kCovarianceEpsilon;
    }
  });
  return model;
}

}  // namespace

std::pair<Eigen::MatrixXd, double> em_responsibilities(
    const Eigen::Matrix<double, Eigen::Dynamic, 4>& points, const Gmm4& model) {
  // Covariances are expected to carry their regularization already.
  const auto prepared = prepare_components<4>(model, nullptr, 0.0);
  const Eigen::Index n = points.rows();
  const Eigen::Index j_count = static_cast<Eigen::Index>(prepared.size());
  Eigen::MatrixXd gamma(n, j_count);
  Eigen::VectorXd per_point_ll(n);

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
    std::vector<double> terms(static_cast<std::size_t>(j_count));
    for (std::size_t row = begin; row < end; ++row) {
      const Eigen::Index rn = static_cast<Eigen::Index>(row);
      const Vec4 x = points.row(rn).transpose();
      for (Eigen::Index b = 0; b < j_count; ++b) {
        const auto& p = prepared[static_cast<std::size_t>(b)];
        terms[static_cast<std::size_t>(b)] =
            p.log_weight + gaussian_log_density<4>(x, p.mean, p.chol_lower);
      }
      const double lse = log_sum_exp(terms.data(), terms.size());
      per_point_ll[rn] = lse;
      for (Eigen::Index b = 0; b < j_count; ++b) {
        // ln gamma_nb = ln pi_b + ln N_b(x_n) - ln sum_a pi_a N_a(x_n)
        gamma(rn, b) = std::exp(terms[static_cast<std::size_t>(b)] - lse);
      }
    }
  });

  // Fixed-order reduction keeps the total independent of the thread count.
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ll += per_point_ll[i];
  return {std::move(gamma), ll};
}

EmResult em_fit(const Eigen::Matrix<double, Eigen::Dynamic, 4>& points,
                const Eigen::MatrixXd& gamma0, const SogmmConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = points.rows();
  if (n == 0 || gamma0.rows() != n || gamma0.cols() < 1) {
    throw std::invalid_argument("em_fit: bad responsibility matrix");
  }

  EmResult res;
  Eigen::MatrixXd gamma = gamma0;
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < cfg.em_max_iters; ++iter) {
    Gmm4 model = m_step(points, gamma);

    // Components starved below one point's worth of mass are dropped.
    const double min_weight = 1.0 / static_cast<double>(n);
    std::vector<GaussianComponent4> kept;
    kept.reserve(model.components.size());
    for (const auto& c : model.components) {
      if (c.weight >= min_weight || model.components.size() == 1) {
        kept.push_back(c);
      } else {
        res.removed_components += 1;
      }
    }
    if (kept.size() != model.components.size()) {
      double sum = 0.0;
      for (const auto& c : kept) sum += c.weight;
      for (auto& c : kept) c.weight /= sum;
      model.components = std::move(kept);
    }

    auto [next_gamma, ll] = em_responsibilities(points, model);
    gamma = std::move(next_gamma);
    res.log_likelihood.push_back(ll);
    res.iterations = iter + 1;
    res.model = std::move(model);

    const double denom = std::max(1.0, std::abs(prev_ll));
    if (std::isfinite(prev_ll) && std::abs(ll - prev_ll) / denom < cfg.em_tol) break;
    prev_ll = ll;
  }

  res.model.support_count = static_cast<std::uint64_t>(n);
  return res;
}

Gmm4 fit_sogmm(const MultimodalCloud& frame_points, const std::vector<double>& depth_per_point,
               const SogmmConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = frame_points.size();
  if (n == 0) throw std::invalid_argument("fit_sogmm: empty point cloud");
  if (static_cast<Eigen::Index>(depth_per_point.size()) != n) {
    throw std::invalid_argument("fit_sogmm: depth list size mismatch");
  }

  // 2D GBMS features: min-max normalized depth and intensity.
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();
  for (double d : depth_per_point) {
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  const double range = dmax > dmin ? dmax - dmin : 1.0;
  Eigen::Matrix<double, Eigen::Dynamic, 2> features(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    features(i, 0) = (depth_per_point[static_cast<std::size_t>(i)] - dmin) / range;
    features(i, 1) = frame_points.pts(i, 3);
  }

  GbmsResult gbms = gbms_mode_count(features, cfg);

  const int max_modes = static_cast<int>(
      std::max<Eigen::Index>(1, n / cfg.min_points_per_component));
  if (gbms.mode_count > max_modes) {
    // Keep the most populated modes and reassign everything to those.
    std::vector<Eigen::Index> members(static_cast<std::size_t>(gbms.mode_count), 0);
    for (int a : gbms.assignments) members[static_cast<std::size_t>(a)] += 1;
    std::vector<int> order(static_cast<std::size_t>(gbms.mode_count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return members[static_cast<std::size_t>(a)] > members[static_cast<std::size_t>(b)]; });
    order.resize(static_cast<std::size_t>(max_modes));
    Eigen::Matrix<double, Eigen::Dynamic, 2> kept(max_modes, 2);
    for (int j = 0; j < max_modes; ++j) kept.row(j) = gbms.modes.row(order[static_cast<std::size_t>(j)]);
    gbms.modes = kept;
    gbms.mode_count = max_modes;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector2d f = features.row(i).transpose();
      int best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int j = 0; j < max_modes; ++j) {
        const double d2 = (gbms.modes.row(j).transpose() - f).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = j;
        }
      }
      gbms.assignments[static_cast<std::size_t>(i)] = best;
    }
  }

  const ResponsibilityMatrix gamma = kinit_responsibilities(gbms.assignments, gbms.mode_count);
  EmResult em = em_fit(frame_points.pts, gamma.gamma, cfg);
  validate_gmm<4>(em.model);
  return em.model;
}

}  // namespace gmap
