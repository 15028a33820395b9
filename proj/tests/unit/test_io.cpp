#include "gmap/io.hpp"

#include "gmap/synth.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace gmap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gmap_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Gmm4 random_model(int k, std::mt19937& rng) {
  Gmm4 m;
  for (int i = 0; i < k; ++i) {
    GaussianComponent4 c;
    c.weight = 1.0 / k;
    c.mean = test::random_vec<4>(rng, 2.0);
    c.cov = test::random_spd<4>(rng, 0.3);
    m.components.push_back(c);
  }
  m.support_count = 12345;
  return m;
}

}  // namespace

TEST_CASE("pgm round trips preserve pixels") {
  TempDir tmp;
  std::mt19937 rng(107);

  ImageU8 gray;
  gray.width = 17;
  gray.height = 9;
  gray.pixels.resize(17 * 9);
  for (auto& p : gray.pixels) p = static_cast<std::uint8_t>(rng());
  save_pgm8(gray, tmp.path / "gray.pgm");
  const auto gray2 = load_pgm8(tmp.path / "gray.pgm");
  CHECK(gray2.width == gray.width);
  CHECK(gray2.height == gray.height);
  CHECK(gray2.pixels == gray.pixels);

  ImageU16 depth;
  depth.width = 13;
  depth.height = 7;
  depth.pixels.resize(13 * 7);
  for (auto& p : depth.pixels) p = static_cast<std::uint16_t>(rng());
  save_pgm16(depth, tmp.path / "depth.pgm");
  const auto depth2 = load_pgm16(tmp.path / "depth.pgm");
  CHECK(depth2.pixels == depth.pixels);

  CHECK_THROWS(load_pgm8(tmp.path / "missing.pgm"));
}

TEST_CASE("load_frame: principal point, invalid depth, decimation") {
  CameraIntrinsics intr{100.0, 100.0, 31.5, 23.5, 64, 48, 1000.0};
  ImageU16 depth;
  depth.width = 64;
  depth.height = 48;
  depth.pixels.assign(64 * 48, 0);
  ImageU8 gray;
  gray.width = 64;
  gray.height = 48;
  gray.pixels.assign(64 * 48, 255);

  SUBCASE("all-zero depth gives an empty cloud") {
    const auto [cloud, depths] = load_frame(depth, gray, intr);
    CHECK(cloud.size() == 0);
    CHECK(depths.empty());
  }

  SUBCASE("pixel nearest the principal point back-projects near the axis") {
    // cx=31.5 lies between pixels 31 and 32; use an integer principal point
    CameraIntrinsics centered = intr;
    centered.cx = 32.0;
    centered.cy = 24.0;
    depth.at(32, 24) = 1000;  // 1 m
    const auto [cloud, depths] = load_frame(depth, gray, centered);
    REQUIRE(cloud.size() == 1);
    CHECK((cloud.position(0) - Vec3(0, 0, 1)).norm() < 1e-12);
    CHECK(cloud.pts(0, 3) == 1.0);
    CHECK(depths[0] == 1.0);
  }

  SUBCASE("decimation keeps every k-th pixel") {
    depth.pixels.assign(64 * 48, 500);
    const auto [full, d1] = load_frame(depth, gray, intr, 1);
    const auto [coarse, d4] = load_frame(depth, gray, intr, 4);
    CHECK(full.size() == 64 * 48);
    CHECK(coarse.size() == 16 * 12);
  }

  SUBCASE("dimension mismatch throws") {
    gray.width = 32;
    gray.pixels.resize(32 * 48);
    CHECK_THROWS_AS(load_frame(depth, gray, intr), std::invalid_argument);
  }
}

TEST_CASE("load_frame inverts a synthetic render of a known plane") {
  const CameraIntrinsics intr{100.0, 100.0, 63.5, 47.5, 128, 96, 1000.0};
  SynthScene scene;
  scene.quads.push_back({1, 2.0, -4.0, 4.0, -4.0, 4.0});  // plane y = 2
  scene.intensity = [](const Vec3&) { return 0.5; };
  const Pose pose = look_at(Vec3(0, 0, 0), Vec3(0, 2, 0));
  const auto frame = render_frame(scene, intr, pose, {});
  auto [cloud, depths] = load_frame(frame.depth, frame.intensity, intr);
  REQUIRE(cloud.size() > 100);
  const auto world = transform_cloud(cloud, pose);
  for (Eigen::Index i = 0; i < world.size(); ++i) {
    // quantization of the 16-bit depth map bounds the error at half a unit
    CHECK(std::abs(world.pts(i, 1) - 2.0) < 2e-3);
  }
}

TEST_CASE("transform_cloud: identity, translation, composition") {
  std::mt19937 rng(109);
  MultimodalCloud cloud;
  cloud.pts.resize(50, 4);
  for (int i = 0; i < 50; ++i) {
    cloud.pts.row(i) << test::random_vec<3>(rng).transpose(), 0.3;
  }

  Pose identity;
  identity.rotation.setIdentity();
  identity.translation.setZero();
  const auto same = transform_cloud(cloud, identity);
  CHECK((same.pts - cloud.pts).cwiseAbs().maxCoeff() == 0.0);

  Pose shift = identity;
  shift.translation = Vec3(1, -2, 3);
  const auto moved = transform_cloud(cloud, shift);
  CHECK((moved.position(0) - cloud.position(0) - shift.translation).norm() < 1e-15);
  CHECK(moved.pts(0, 3) == cloud.pts(0, 3));

  Pose p1, p2;
  p1.rotation = Eigen::AngleAxisd(0.4, Vec3::UnitZ()).toRotationMatrix();
  p1.translation = Vec3(0.1, 0.2, 0.3);
  p2.rotation = Eigen::AngleAxisd(-0.9, Vec3(1, 1, 0).normalized()).toRotationMatrix();
  p2.translation = Vec3(-1, 0, 2);
  const auto sequential = transform_cloud(transform_cloud(cloud, p1), p2);
  const auto composed = transform_cloud(cloud, p2.compose(p1));
  CHECK((sequential.pts - composed.pts).cwiseAbs().maxCoeff() < 1e-9);

  Pose bad = identity;
  bad.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(transform_cloud(cloud, bad), std::invalid_argument);
}

TEST_CASE("model files: size formula and bit-exact round trip") {
  TempDir tmp;
  std::mt19937 rng(113);

  SUBCASE("single identity component is a 76-byte file") {
    Gmm4 one;
    GaussianComponent4 c;
    c.weight = 1.0;
    c.mean.setZero();
    c.cov = Mat4::Identity();
    one.components.push_back(c);
    one.support_count = 1;
    save_model(one, tmp.path / "one.bin");
    CHECK(fs::file_size(tmp.path / "one.bin") == 76);
  }

  SUBCASE("1165 components occupy 69916 bytes") {
    const auto model = random_model(1165, rng);
    save_model(model, tmp.path / "big.bin");
    CHECK(fs::file_size(tmp.path / "big.bin") == 69916);
  }

  SUBCASE("round trip reproduces the f32-quantized parameters bit-exactly") {
    const auto model = random_model(100, rng);
    save_model(model, tmp.path / "m.bin");
    const auto loaded = load_model(tmp.path / "m.bin");
    REQUIRE(loaded.size() == 100);
    CHECK(loaded.support_count == model.support_count);

    // save the loaded model again: the bytes must be identical
    save_model(loaded, tmp.path / "m2.bin");
    std::ifstream fa(tmp.path / "m.bin", std::ios::binary);
    std::ifstream fb(tmp.path / "m2.bin", std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), {});
    const std::string bb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(ba == bb);

    // quantization to f32 is the only loss
    for (std::size_t k = 0; k < 100; ++k) {
      CHECK(loaded.components[k].weight ==
            static_cast<double>(static_cast<float>(model.components[k].weight)));
      for (int d = 0; d < 4; ++d) {
        CHECK(loaded.components[k].mean[d] ==
              static_cast<double>(static_cast<float>(model.components[k].mean[d])));
      }
      CHECK((loaded.components[k].cov - loaded.components[k].cov.transpose())
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("model files: distinct failure modes") {
  TempDir tmp;
  std::mt19937 rng(127);
  const auto model = random_model(3, rng);
  save_model(model, tmp.path / "m.bin");

  SUBCASE("bad magic") {
    std::fstream f(tmp.path / "m.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
    f.close();
    CHECK_THROWS_AS(load_model(tmp.path / "m.bin"), ModelBadMagic);
  }

  SUBCASE("bad version") {
    std::fstream f(tmp.path / "m.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const std::uint32_t v = 999;
    f.write(reinterpret_cast<const char*>(&v), 4);
    f.close();
    CHECK_THROWS_AS(load_model(tmp.path / "m.bin"), ModelBadVersion);
  }

  SUBCASE("truncation") {
    fs::resize_file(tmp.path / "m.bin", 100);
    CHECK_THROWS_AS(load_model(tmp.path / "m.bin"), ModelTruncated);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_model(tmp.path / "missing.bin"), ModelIoError);
  }
}

TEST_CASE("ply export/import round trip") {
  TempDir tmp;
  std::mt19937 rng(131);
  MultimodalCloud cloud;
  cloud.pts.resize(64, 4);
  for (int i = 0; i < 64; ++i) {
    cloud.pts.row(i) << test::random_vec<3>(rng, 2.0).transpose(),
        (i % 256) / 255.0;
  }

  export_ply(cloud, tmp.path / "c.ply");
  const auto loaded = import_ply(tmp.path / "c.ply");
  REQUIRE(loaded.size() == 64);
  for (Eigen::Index i = 0; i < 64; ++i) {
    // positions survive as f32, intensity as uint8
    CHECK((loaded.position(i).cast<float>() - cloud.position(i).cast<float>()).norm() <
          1e-6);
    CHECK(std::abs(loaded.pts(i, 3) - cloud.pts(i, 3)) <= 0.5 / 255.0 + 1e-12);
  }
}

TEST_CASE("manifest round trip resolves relative paths") {
  TempDir tmp;
  Manifest m;
  m.intrinsics = {100.0, 100.0, 63.5, 47.5, 128, 96, 1000.0};
  Manifest::Frame f;
  f.depth_path = tmp.path / "d0.pgm";
  f.intensity_path = tmp.path / "i0.pgm";
  f.pose.rotation = Eigen::AngleAxisd(0.3, Vec3::UnitY()).toRotationMatrix();
  f.pose.translation = Vec3(1, 2, 3);
  m.frames.push_back(f);

  save_manifest(m, tmp.path / "scene.txt");
  const auto loaded = load_manifest(tmp.path / "scene.txt");
  REQUIRE(loaded.frames.size() == 1);
  CHECK(loaded.intrinsics.fx == 100.0);
  CHECK(loaded.intrinsics.width == 128);
  CHECK(loaded.frames[0].depth_path.parent_path() == tmp.path);
  CHECK(loaded.frames[0].depth_path.filename() == "d0.pgm");
  CHECK((loaded.frames[0].pose.rotation - f.pose.rotation).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((loaded.frames[0].pose.translation - f.pose.translation).cwiseAbs().maxCoeff() <
        1e-12);

  // invalid pose rows are rejected
  std::ofstream bad(tmp.path / "bad.txt");
  bad << "intrinsics 100 100 63.5 47.5 128 96 1000\n";
  bad << "frame d.pgm i.pgm 2 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n";
  bad.close();
  CHECK_THROWS(load_manifest(tmp.path / "bad.txt"));
}
