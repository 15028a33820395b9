#include "gmap/eval.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace gmap;

namespace {

MultimodalCloud random_cloud(int n, std::mt19937& rng, double scale = 1.0) {
  MultimodalCloud cloud;
  cloud.pts.resize(n, 4);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::uniform_real_distribution<double> ui(0.0, 1.0);
  for (int i = 0; i < n; ++i) cloud.pts.row(i) << u(rng), u(rng), u(rng), ui(rng);
  return cloud;
}

// brute-force metric computation, long double accumulation
ReconstructionReport metrics_oracle(const MultimodalCloud& pred, const MultimodalCloud& gt,
                                    double thresh) {
  const auto nearest = [](const MultimodalCloud& from, Eigen::Index i,
                          const MultimodalCloud& to) {
    Eigen::Index best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < to.size(); ++j) {
      const double d2 = (from.position(i) - to.position(j)).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = j;
      }
    }
    return std::make_pair(best, std::sqrt(best_d2));
  };

  ReconstructionReport r;
  long double dist_sum = 0.0L, mse = 0.0L;
  Eigen::Index pred_hits = 0, gt_hits = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const auto [j, d] = nearest(pred, i, gt);
    dist_sum += d;
    if (d <= thresh) ++pred_hits;
    const long double di = pred.pts(i, 3) - gt.pts(j, 3);
    mse += di * di;
  }
  for (Eigen::Index j = 0; j < gt.size(); ++j) {
    if (nearest(gt, j, pred).second <= thresh) ++gt_hits;
  }
  r.mre = static_cast<double>(dist_sum / pred.size());
  r.precision = static_cast<double>(pred_hits) / pred.size();
  r.recall = static_cast<double>(gt_hits) / gt.size();
  const double m = static_cast<double>(mse / pred.size());
  r.psnr = m <= 0.0 ? kPsnrCapDb : std::min(kPsnrCapDb, -10.0 * std::log10(m));
  return r;
}

}  // namespace

TEST_CASE("voxel_downsample: trivial cases and occupancy oracle") {
  MultimodalCloud one;
  one.pts.resize(1, 4);
  one.pts.row(0) << 0.3, 0.4, 0.5, 0.7;
  const auto kept = voxel_downsample(one, 0.01);
  REQUIRE(kept.size() == 1);
  CHECK((kept.pts.row(0) - one.pts.row(0)).cwiseAbs().maxCoeff() < 1e-15);

  MultimodalCloud pair;
  pair.pts.resize(2, 4);
  pair.pts.row(0) << 0.001, 0.001, 0.001, 0.2;
  pair.pts.row(1) << 0.003, 0.003, 0.003, 0.8;
  const auto merged = voxel_downsample(pair, 0.01);
  REQUIRE(merged.size() == 1);
  CHECK(merged.pts(0, 0) == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(merged.pts(0, 3) == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937 rng(79);
  const auto cloud = random_cloud(500, rng);
  const double voxel = 0.25;
  std::set<std::array<std::int64_t, 3>> occupied;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    occupied.insert({static_cast<std::int64_t>(std::floor(cloud.pts(i, 0) / voxel)),
                     static_cast<std::int64_t>(std::floor(cloud.pts(i, 1) / voxel)),
                     static_cast<std::int64_t>(std::floor(cloud.pts(i, 2) / voxel))});
  }
  CHECK(voxel_downsample(cloud, voxel).size() ==
        static_cast<Eigen::Index>(occupied.size()));
}

TEST_CASE("build_ground_truth: concatenation then filter; empty input throws") {
  CHECK_THROWS_AS(build_ground_truth({}, 0.01), std::invalid_argument);

  std::mt19937 rng(83);
  const auto a = random_cloud(100, rng);
  const auto b = random_cloud(100, rng);
  MultimodalCloud both;
  both.pts.resize(200, 4);
  both.pts.topRows(100) = a.pts;
  both.pts.bottomRows(100) = b.pts;

  const auto gt = build_ground_truth({a, b}, 0.05);
  const auto direct = voxel_downsample(both, 0.05);
  REQUIRE(gt.size() == direct.size());
  CHECK((gt.pts - direct.pts).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("compute_metrics: identity and uniform shift") {
  std::mt19937 rng(89);
  const auto cloud = random_cloud(200, rng);

  const auto same = compute_metrics(cloud, cloud);
  CHECK(same.mre == 0.0);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.psnr == kPsnrCapDb);

  MultimodalCloud shifted = cloud;
  shifted.pts.col(0).array() += 0.02;
  const auto off = compute_metrics(shifted, cloud, 0.01);
  CHECK(off.mre == doctest::Approx(0.02).epsilon(1e-9));
  CHECK(off.precision == 0.0);
  CHECK(off.recall == 0.0);

  MultimodalCloud empty;
  CHECK_THROWS_AS(compute_metrics(empty, cloud), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(cloud, empty), std::invalid_argument);
}

TEST_CASE("compute_metrics: exhaustive oracle on random pairs") {
  std::mt19937 rng(97);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pred = random_cloud(100, rng);
    const auto gt = random_cloud(100, rng);
    const double thresh = 0.5;
    const auto fast = compute_metrics(pred, gt, thresh);
    const auto slow = metrics_oracle(pred, gt, thresh);
    CHECK(std::abs(fast.mre - slow.mre) < 1e-12);
    CHECK(fast.precision == slow.precision);
    CHECK(fast.recall == slow.recall);
    CHECK(std::abs(fast.psnr - slow.psnr) < 1e-12);
  }
}

TEST_CASE("compute_metrics: precision/recall symmetry and rigid invariance") {
  std::mt19937 rng(101);
  const auto a = random_cloud(150, rng);
  const auto b = random_cloud(120, rng);

  const auto ab = compute_metrics(a, b, 0.3);
  const auto ba = compute_metrics(b, a, 0.3);
  CHECK(ab.precision == ba.recall);
  CHECK(ab.recall == ba.precision);

  // rotate both clouds by the same rigid transform
  const Eigen::AngleAxisd rot(0.7, Vec3(1, 2, 3).normalized());
  const Vec3 t(0.5, -1.0, 2.0);
  MultimodalCloud ra = a, rb = b;
  for (Eigen::Index i = 0; i < ra.size(); ++i) {
    ra.pts.row(i).head<3>() = (rot * a.position(i) + t).transpose();
  }
  for (Eigen::Index i = 0; i < rb.size(); ++i) {
    rb.pts.row(i).head<3>() = (rot * b.position(i) + t).transpose();
  }
  const auto rotated = compute_metrics(ra, rb, 0.3);
  CHECK(std::abs(rotated.mre - ab.mre) < 1e-9);
  CHECK(rotated.precision == ab.precision);
  CHECK(rotated.recall == ab.recall);
  CHECK(std::abs(rotated.psnr - ab.psnr) < 1e-6);
}

TEST_CASE("KnnIndex matches exhaustive nearest neighbors") {
  std::mt19937 rng(103);
  const auto cloud = random_cloud(512, rng, 2.0);
  const KnnIndex index(cloud.xyz());
  for (int q = 0; q < 300; ++q) {
    const Vec3 query = test::random_vec<3>(rng, 2.5);
    const auto [idx, d2] = index.nearest(query);
    Eigen::Index best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < cloud.size(); ++j) {
      const double d = (cloud.position(j) - query).squaredNorm();
      if (d < best_d2) {
        best_d2 = d;
        best = j;
      }
    }
    // expression evaluation order may differ in the last ulp
    CHECK(d2 == doctest::Approx(best_d2).epsilon(1e-12));
    CHECK((cloud.position(idx) - cloud.position(best)).norm() == 0.0);
  }
}

TEST_CASE("model_bytes: header plus 60 per component") {
  Gmm4 model;
  CHECK(model_bytes(model) == 16);
  GaussianComponent4 c;
  c.weight = 1.0;
  c.mean.setZero();
  c.cov = Mat4::Identity();
  model.components.push_back(c);
  CHECK(model_bytes(model) == 76);
  model.components.resize(1165, c);
  CHECK(model_bytes(model) == 69916);
}

TEST_CASE("format_report_table lists every row with its method name") {
  std::vector<ReportRow> rows(2);
  rows[0].method = "ours";
  rows[0].param = "0.02";
  rows[0].report = {0.004, 0.98, 0.97, 25.0, 69916};
  rows[1].method = "baseline";
  rows[1].param = "-";
  rows[1].report = {0.010, 0.90, 0.85, 20.0, 1234};
  const std::string table = format_report_table(rows);
  CHECK(table.find("ours") != std::string::npos);
  CHECK(table.find("baseline") != std::string::npos);
  CHECK(table.find("MRE") != std::string::npos);
  CHECK(table.find("PSNR") != std::string::npos);
}
