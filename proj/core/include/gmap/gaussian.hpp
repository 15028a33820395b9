#pragma once

#include "gmap/parallel.hpp"
#include "gmap/rng.hpp"
#include "gmap/types.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace gmap {

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Default diagonal loading added to covariances before factorization.
inline constexpr double kCovarianceEpsilon = 1e-6;

/// Cholesky factor of cov + eps*I. Throws if the result is not positive
/// definite.
template <int D>
Eigen::Matrix<double, D, D> cholesky_lower(const Eigen::Matrix<double, D, D>& cov,
                                           double eps = 0.0) {
  Eigen::Matrix<double, D, D> reg = cov;
  if (eps > 0.0) reg.diagonal().array() += eps;
  Eigen::LLT<Eigen::Matrix<double, D, D>> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("cholesky_lower: covariance not positive definite");
  }
  return llt.matrixL();
}

/// ln N(x; mean, L L^T) in the Cholesky form:
///   -1/2 (D ln 2pi + ||L^{-1}(x - mean)||^2) + sum_j ln(diag(L^{-1}))_j
template <int D>
double gaussian_log_density(const Eigen::Matrix<double, D, 1>& x,
                            const Eigen::Matrix<double, D, 1>& mean,
                            const Eigen::Matrix<double, D, D>& chol_lower) {
  if (!x.allFinite() || !mean.allFinite() || !chol_lower.allFinite()) {
    throw std::invalid_argument("gaussian_log_density: non-finite input");
  }
  double log_det_prec = 0.0;
  for (int j = 0; j < D; ++j) {
    const double d = chol_lower(j, j);
    if (d <= 0.0) throw std::domain_error("gaussian_log_density: singular Cholesky factor");
    log_det_prec -= std::log(d);
  }
  const Eigen::Matrix<double, D, 1> whitened =
      chol_lower.template triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * (D * kLog2Pi + whitened.squaredNorm()) + log_det_prec;
}

/// Mixture component with precomputed Cholesky factor and log-weight.
template <int D>
struct PreparedComponent {
  double log_weight;
  Eigen::Matrix<double, D, 1> mean;
  Eigen::Matrix<double, D, D> chol_lower;
};

template <int D>
std::vector<PreparedComponent<D>> prepare_components(const Gmm<D>& model,
                                                     const std::vector<std::uint32_t>* subset,
                                                     double eps = kCovarianceEpsilon) {
  std::vector<PreparedComponent<D>> out;
  const std::size_t count = subset ? subset->size() : model.size();
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = subset ? (*subset)[i] : i;
    if (k >= model.size()) throw std::out_of_range("prepare_components: bad subset index");
    const auto& c = model.components[k];
    out.push_back({std::log(c.weight), c.mean, cholesky_lower<D>(c.cov, eps)});
  }
  return out;
}

/// ln sum_k exp(v_k) with the max-shift stabilization; -inf for empty input.
inline double log_sum_exp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

template <int D>
double mixture_log_density(const Eigen::Matrix<double, D, 1>& x,
                           const std::vector<PreparedComponent<D>>& comps) {
  std::vector<double> terms(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    terms[k] = comps[k].log_weight + gaussian_log_density<D>(x, comps[k].mean, comps[k].chol_lower);
  }
  return log_sum_exp(terms.data(), terms.size());
}

/// Per-point mixture log-likelihood, optionally restricted to a component
/// subset. Parallel over points; each element depends only on its own row, so
/// the result is thread-count independent.
template <int D>
Eigen::VectorXd gmm_log_likelihood(const Eigen::Matrix<double, Eigen::Dynamic, D>& pts,
                                   const Gmm<D>& model,
                                   const std::vector<std::uint32_t>* subset = nullptr) {
  if (subset && subset->empty()) {
    throw std::invalid_argument("gmm_log_likelihood: empty component subset");
  }
  if (model.empty()) throw std::invalid_argument("gmm_log_likelihood: empty model");
  const auto prepared = prepare_components<D>(model, subset);
  Eigen::VectorXd out(pts.rows());
  parallel_for(static_cast<std::size_t>(pts.rows()), [&](std::size_t begin, std::size_t end) {
    std::vector<double> terms(prepared.size());
    for (std::size_t n = begin; n < end; ++n) {
      const Eigen::Matrix<double, D, 1> x = pts.row(static_cast<Eigen::Index>(n)).transpose();
      for (std::size_t k = 0; k < prepared.size(); ++k) {
        terms[k] = prepared[k].log_weight +
                   gaussian_log_density<D>(x, prepared[k].mean, prepared[k].chol_lower);
      }
      out[static_cast<Eigen::Index>(n)] = log_sum_exp(terms.data(), terms.size());
    }
  });
  return out;
}

///// Drops the intensity dimension: weights unchanged, means and covariances
/// reduced to their spatial blocks.
Gmm3 marginalize_spatial(const Gmm4& model);

struct ConditionalIntensity {
  double mean;      // clamped to [0, 1]
  double variance;  // mixture-conditional variance (law of total variance)
};

/// E[i | x] and Var[i | x] under the 4D mixture. Throws when x has no
/// numerical support under any component.
ConditionalIntensity condition_intensity(const Gmm4& model, const Vec3& x);

/// n samples mean + L u with u from seeded Box-Muller. Sample s uses counters
/// [s*D, (s+1)*D) of the stream, so any slice of the output is reproducible.
template <int D>
Eigen::Matrix<double, Eigen::Dynamic, D> sample_component(const GaussianComponent<D>& comp,
                                                          Eigen::Index n,
                                                          std::uint64_t rng_seed) {
  const Eigen::Matrix<double, D, D> chol = cholesky_lower<D>(comp.cov, kCovarianceEpsilon);
  const CounterRng rng{rng_seed};
  Eigen::Matrix<double, Eigen::Dynamic, D> out(n, D);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
    Eigen::Matrix<double, D, 1> u;
    for (std::size_t s = begin; s < end; ++s) {
      for (int j = 0; j < D; ++j) u[j] = rng.normal(static_cast<std::uint64_t>(s) * D + j);
      out.row(static_cast<Eigen::Index>(s)) = (comp.mean + chol * u).transpose();
    }
  });
  return out;
}

/// Weight-sum and SPD checks for a fitted mixture.
template <int D>
void validate_gmm(const Gmm<D>& model, double weight_tol = 1e-9) {
  if (model.empty()) throw std::invalid_argument("validate_gmm: no components");
  if (std::abs(model.weight_sum() - 1.0) > weight_tol) {
    throw std::invalid_argument("validate_gmm: weights do not sum to 1");
  }
  for (const auto& c : model.components) {
    if (c.weight <= 0.0 || c.weight > 1.0 + weight_tol) {
      throw std::invalid_argument("validate_gmm: weight out of (0, 1]");
    }
    cholesky_lower<D>(c.cov, kCovarianceEpsilon);  // throws if not SPD
  }
}

}  // namespace gmap
