#include "gmap/gaussian.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gmap;

namespace {

template <int D>
double explicit_log_density(const Eigen::Matrix<double, D, 1>& x,
                            const Eigen::Matrix<double, D, 1>& mean,
                            const Eigen::Matrix<double, D, D>& cov) {
  const double det = cov.determinant();
  const Eigen::Matrix<double, D, 1> d = x - mean;
  return -0.5 * (D * std::log(2.0 * M_PI) + std::log(det) + d.dot(cov.inverse() * d));
}

}  // namespace

TEST_CASE("gaussian_log_density: closed-form corner cases") {
  const Vec4 zero4 = Vec4::Zero();
  const Mat4 eye4 = Mat4::Identity();
  CHECK(gaussian_log_density<4>(zero4, zero4, cholesky_lower<4>(eye4)) ==
        doctest::Approx(-2.0 * std::log(2.0 * M_PI)).epsilon(1e-12));

  const Vec3 mean = Vec3(0.3, -1.0, 2.0);
  const Vec3 x = mean + Vec3::UnitX();
  CHECK(gaussian_log_density<3>(x, mean, cholesky_lower<3>(Mat3::Identity())) ==
        doctest::Approx(-1.5 * std::log(2.0 * M_PI) - 0.5).epsilon(1e-12));
}

TEST_CASE("gaussian_log_density: error paths") {
  const Vec3 nan_vec = Vec3::Constant(std::nan(""));
  CHECK_THROWS_AS(gaussian_log_density<3>(nan_vec, Vec3::Zero(), Mat3::Identity()),
                  std::invalid_argument);
  Mat3 singular = Mat3::Identity();
  singular(1, 1) = 0.0;
  CHECK_THROWS_AS(gaussian_log_density<3>(Vec3::Zero(), Vec3::Zero(), singular),
                  std::domain_error);
}

TEST_CASE("gaussian_log_density: matches determinant/inverse formula, dims 2-4") {
  std::mt19937 rng(7);
  auto check_dim = [&]<int D>() {
    for (int trial = 0; trial < 300; ++trial) {
      const auto cov = test::random_spd<D>(rng);
      const auto mean = test::random_vec<D>(rng);
      const auto x = test::random_vec<D>(rng, 2.0);
      const double got = gaussian_log_density<D>(x, mean, cholesky_lower<D>(cov));
      const double want = explicit_log_density<D>(x, mean, cov);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  };
  check_dim.operator()<2>();
  check_dim.operator()<3>();
  check_dim.operator()<4>();
}

TEST_CASE("gmm_log_likelihood: single and collapsed mixtures") {
  Gmm3 one;
  one.components.push_back({1.0, Vec3::Zero(), Mat3::Identity()});
  Eigen::Matrix<double, Eigen::Dynamic, 3> pts(1, 3);
  pts.setZero();
  // remember the model definition includes the +eps*I regularizer
  const double expected = -1.5 * std::log(2.0 * M_PI * (1.0 + kCovarianceEpsilon));
  CHECK(gmm_log_likelihood<3>(pts, one)[0] == doctest::Approx(expected).epsilon(1e-9));

  Gmm3 two;
  two.components.push_back({0.5, Vec3::Zero(), Mat3::Identity()});
  two.components.push_back({0.5, Vec3::Zero(), Mat3::Identity()});
  CHECK(gmm_log_likelihood<3>(pts, two)[0] ==
        doctest::Approx(gmm_log_likelihood<3>(pts, one)[0]).epsilon(1e-12));
}

TEST_CASE("gmm_log_likelihood: naive summation oracle and permutation invariance") {
  std::mt19937 rng(11);
  Gmm3 model;
  double wsum = 0.0;
  for (int k = 0; k < 5; ++k) {
    GaussianComponent3 c;
    c.weight = 0.1 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    c.mean = test::random_vec<3>(rng, 2.0);
    c.cov = test::random_spd<3>(rng);
    wsum += c.weight;
    model.components.push_back(c);
  }
  for (auto& c : model.components) c.weight /= wsum;

  Eigen::Matrix<double, Eigen::Dynamic, 3> pts(100, 3);
  for (int n = 0; n < 100; ++n) pts.row(n) = test::random_vec<3>(rng, 3.0).transpose();

  const Eigen::VectorXd got = gmm_log_likelihood<3>(pts, model);
  for (int n = 0; n < 100; ++n) {
    const double want =
        test::naive_mixture_log_density<3>(pts.row(n).transpose(), model, kCovarianceEpsilon);
    CHECK(got[n] == doctest::Approx(want).epsilon(1e-9));
  }

  Gmm3 permuted;
  permuted.components = {model.components[3], model.components[0], model.components[4],
                         model.components[1], model.components[2]};
  const Eigen::VectorXd got_perm = gmm_log_likelihood<3>(pts, permuted);
  for (int n = 0; n < 100; ++n) {
    CHECK(std::abs(got[n] - got_perm[n]) < 1e-12);
  }
}

TEST_CASE("gmm_log_likelihood: empty subset is an error, empty points are not") {
  Gmm3 model;
  model.components.push_back({1.0, Vec3::Zero(), Mat3::Identity()});
  Eigen::Matrix<double, Eigen::Dynamic, 3> no_pts(0, 3);
  CHECK(gmm_log_likelihood<3>(no_pts, model).size() == 0);
  const std::vector<std::uint32_t> empty_subset;
  CHECK_THROWS_AS(gmm_log_likelihood<3>(no_pts, model, &empty_subset), std::invalid_argument);
}

TEST_CASE("marginalize_spatial: diagonal blocks and weights") {
  Gmm4 model;
  GaussianComponent4 c;
  c.weight = 1.0;
  c.mean << 1.0, 2.0, 3.0, 0.5;
  c.cov = Vec4(0.4, 0.3, 0.2, 0.01).asDiagonal();
  model.components.push_back(c);
  model.support_count = 10;

  const Gmm3 marginal = marginalize_spatial(model);
  CHECK(marginal.support_count == 10);
  CHECK(marginal.components[0].weight == 1.0);
  CHECK(marginal.components[0].mean.isApprox(Vec3(1.0, 2.0, 3.0)));
  CHECK(marginal.components[0].cov.isApprox(Mat3(Vec3(0.4, 0.3, 0.2).asDiagonal())));
}

TEST_CASE("marginalize_spatial: quadrature oracle over intensity") {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    Gmm4 model;
    double wsum = 0.0;
    for (int k = 0; k < 2; ++k) {
      GaussianComponent4 c;
      c.weight = 0.2 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      c.mean = test::random_vec<4>(rng);
      c.mean[3] = 0.5 + 0.2 * c.mean[3];
      c.cov = test::random_spd<4>(rng, 0.5);
      wsum += c.weight;
      model.components.push_back(c);
    }
    for (auto& c : model.components) c.weight /= wsum;

    const Gmm3 marginal = marginalize_spatial(model);
    const auto prepared4 = prepare_components<4>(model, nullptr);
    for (int q = 0; q < 5; ++q) {
      const Vec3 x = test::random_vec<3>(rng);
      const double marg_density =
          std::exp(test::naive_mixture_log_density<3>(x, marginal, kCovarianceEpsilon));

      // Simpson quadrature of the 4D density over intensity.
      double lo = 1e300, hi = -1e300;
      for (const auto& c : model.components) {
        const double sigma_i = std::sqrt(c.cov(3, 3));
        lo = std::min(lo, c.mean[3] - 5.0 * sigma_i);
        hi = std::max(hi, c.mean[3] + 5.0 * sigma_i);
      }
      const int steps = 4000;  // even
      const double h = (hi - lo) / steps;
      double integral = 0.0;
      for (int s = 0; s <= steps; ++s) {
        Vec4 z;
        z << x, lo + s * h;
        const double f = std::exp(mixture_log_density<4>(z, prepared4));
        const double coeff = (s == 0 || s == steps) ? 1.0 : (s % 2 == 1 ? 4.0 : 2.0);
        integral += coeff * f;
      }
      integral *= h / 3.0;
      CHECK(std::abs(integral - marg_density) < 1e-3);
    }
  }
}

TEST_CASE("condition_intensity: independent intensity block") {
  Gmm4 model;
  GaussianComponent4 c;
  c.weight = 1.0;
  c.mean << 0.0, 0.0, 0.0, 0.7;
  c.cov = Vec4(1.0, 1.0, 1.0, 0.01).asDiagonal();
  model.components.push_back(c);
  const auto cond = condition_intensity(model, Vec3(0.4, -0.2, 1.0));
  CHECK(cond.mean == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(cond.variance == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("condition_intensity: linear-Gaussian construction") {
  // i = 0.4 + 0.1 * x1 + noise, x ~ N((1,0,0), diag(0.5)).
  const Vec3 beta(0.1, 0.0, 0.0);
  const Mat3 cov_x = 0.5 * Mat3::Identity();
  const double noise_var = 1e-4;

  Gmm4 model;
  GaussianComponent4 c;
  c.weight = 1.0;
  c.mean << 1.0, 0.0, 0.0, 0.4 + 0.1 * 1.0;
  c.cov.topLeftCorner<3, 3>() = cov_x;
  c.cov.topRightCorner<3, 1>() = cov_x * beta;
  c.cov.bottomLeftCorner<1, 3>() = (cov_x * beta).transpose();
  c.cov(3, 3) = beta.dot(cov_x * beta) + noise_var;
  model.components.push_back(c);

  const auto cond = condition_intensity(model, Vec3(2.0, 0.0, 0.0));
  CHECK(cond.mean == doctest::Approx(0.6).epsilon(1e-5));
}

TEST_CASE("condition_intensity: far-field collapse onto the near component") {
  Gmm4 model;
  GaussianComponent4 a;
  a.weight = 0.5;
  a.mean << 0.0, 0.0, 0.0, 0.2;
  a.cov = Mat4::Identity() * 0.1;
  GaussianComponent4 b = a;
  b.weight = 0.5;
  b.mean << 30.0, 0.0, 0.0, 0.9;
  model.components = {a, b};

  const auto cond = condition_intensity(model, Vec3(0.0, 0.0, 0.0));
  CHECK(std::abs(cond.mean - 0.2) < 1e-9);

  CHECK_THROWS_AS(condition_intensity(model, Vec3(1e6, 1e6, 1e6)), std::domain_error);
}

TEST_CASE("sample_component: determinism and moments") {
  GaussianComponent3 comp;
  comp.weight = 1.0;

  CHECK(sample_component<3>(comp, 0, 42).rows() == 0);

  const auto a = sample_component<3>(comp, 1000, 42);
  const auto b = sample_component<3>(comp, 1000, 42);
  CHECK(a.isApprox(b));
  const auto c = sample_component<3>(comp, 1000, 43);
  CHECK(!a.isApprox(c));

  const auto big = sample_component<3>(comp, 100000, 7);
  const Vec3 mean = big.colwise().mean().transpose();
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);
  const Eigen::Matrix<double, Eigen::Dynamic, 3> centered = big.rowwise() - mean.transpose();
  const Mat3 cov = centered.transpose() * centered / big.rows();
  CHECK((cov - Mat3::Identity()).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("sample_component: whitened samples pass a moment check") {
  std::mt19937 rng(3);
  GaussianComponent3 comp;
  comp.weight = 1.0;
  comp.mean = test::random_vec<3>(rng);
  comp.cov = test::random_spd<3>(rng);
  const Mat3 chol = cholesky_lower<3>(comp.cov, kCovarianceEpsilon);

  const auto samples = sample_component<3>(comp, 100000, 99);
  Eigen::Matrix<double, Eigen::Dynamic, 3> whitened(samples.rows(), 3);
  for (Eigen::Index n = 0; n < samples.rows(); ++n) {
    whitened.row(n) = chol.triangularView<Eigen::Lower>()
                          .solve(Vec3(samples.row(n).transpose() - comp.mean))
                          .transpose();
  }
  const Vec3 mean = whitened.colwise().mean().transpose();
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);
  const Eigen::Matrix<double, Eigen::Dynamic, 3> centered = whitened.rowwise() - mean.transpose();
  const Mat3 cov = centered.transpose() * centered / whitened.rows();
  CHECK((cov - Mat3::Identity()).cwiseAbs().maxCoeff() < 0.05);
}
