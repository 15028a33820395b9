#include "gmap/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gmap {

namespace {

static_assert(std::endian::native == std::endian::little,
              "model and PLY serialization assume a little-endian host");

void write_exact(std::ofstream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!os) throw std::runtime_error("write failed");
}

void read_exact(std::ifstream& is, void* data, std::size_t n) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n)) throw ModelTruncated();
}

// Skips whitespace and '#' comment lines in a PGM header.
int next_pgm_int(std::ifstream& is) {
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = is.get();
  }
  if (c == EOF) throw std::runtime_error("pgm: truncated header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = is.get();
  }
  return value;
}

struct PgmHeader {
  int width, height, maxval;
};

PgmHeader read_pgm_header(std::ifstream& is, const std::filesystem::path& path) {
  char magic[2];
  is.read(magic, 2);
  if (!is || magic[0] != 'P' || magic[1] != '5') {
    throw std::runtime_error("pgm: not a binary PGM: " + path.string());
  }
  PgmHeader h;
  h.width = next_pgm_int(is);
  h.height = next_pgm_int(is);
  h.maxval = next_pgm_int(is);
  return h;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (fx <= 0.0 || fy <= 0.0) throw std::invalid_argument("intrinsics: focal lengths must be > 0");
  if (width < 1 || height < 1) throw std::invalid_argument("intrinsics: bad image size");
  if (depth_scale <= 0.0) throw std::invalid_argument("intrinsics: depth_scale must be > 0");
}

ImageU8 load_pgm8(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const PgmHeader h = read_pgm_header(is, path);
  if (h.maxval > 255) throw std::runtime_error("pgm: expected 8-bit data: " + path.string());
  ImageU8 img{h.width, h.height, std::vector<std::uint8_t>(static_cast<std::size_t>(h.width) * h.height)};
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw std::runtime_error("pgm: truncated data: " + path.string());
  }
  return img;
}

ImageU16 load_pgm16(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const PgmHeader h = read_pgm_header(is, path);
  if (h.maxval <= 255) throw std::runtime_error("pgm: expected 16-bit data: " + path.string());
  const std::size_t count = static_cast<std::size_t>(h.width) * h.height;
  std::vector<std::uint8_t> raw(count * 2);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (is.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error("pgm: truncated data: " + path.string());
  }
  ImageU16 img{h.width, h.height, std::vector<std::uint16_t>(count)};
  for (std::size_t i = 0; i < count; ++i) {
    // PGM stores 16-bit samples big-endian.
    img.pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return img;
}

void save_pgm8(const ImageU8& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  write_exact(os, img.pixels.data(), img.pixels.size());
}

void save_pgm16(const ImageU16& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<std::uint8_t> raw(img.pixels.size() * 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    raw[2 * i] = static_cast<std::uint8_t>(img.pixels[i] >> 8);
    raw[2 * i + 1] = static_cast<std::uint8_t>(img.pixels[i] & 0xff);
  }
  write_exact(os, raw.data(), raw.size());
}

std::pair<MultimodalCloud, std::vector<double>> load_frame(const ImageU16& depth,
                                                           const ImageU8& intensity,
                                                           const CameraIntrinsics& intrinsics,
                                                           int decimation) {
  intrinsics.validate();
  if (decimation < 1) throw std::invalid_argument("load_frame: decimation must be >= 1");
  if (depth.width != intensity.width || depth.height != intensity.height) {
    throw std::invalid_argument("load_frame: image dimension mismatch");
  }

  std::vector<Eigen::Vector4d> rows;
  std::vector<double> depths;
  for (int v = 0; v < depth.height; v += decimation) {
    for (int u = 0; u < depth.width; u += decimation) {
      const std::uint16_t raw = depth.at(u, v);
      if (raw == 0) continue;
      const double d = static_cast<double>(raw) / intrinsics.depth_scale;
      rows.emplace_back((u - intrinsics.cx) * d / intrinsics.fx,
                        (v - intrinsics.cy) * d / intrinsics.fy, d,
                        static_cast<double>(intensity.at(u, v)) / 255.0);
      depths.push_back(d);
    }
  }

  MultimodalCloud cloud(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    cloud.pts.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return {std::move(cloud), std::move(depths)};
}

MultimodalCloud transform_cloud(const MultimodalCloud& cloud, const Pose& pose) {
  if (!pose.is_valid()) throw std::invalid_argument("transform_cloud: invalid pose");
  MultimodalCloud out = cloud;
  out.xyz() = (cloud.xyz() * pose.rotation.transpose()).rowwise() + pose.translation.transpose();
  return out;
}

void save_model(const Gmm4& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelIoError("cannot open " + path.string());
  write_exact(os, "SGMM", 4);
  const std::uint32_t version = 1;
  const auto count = static_cast<std::uint32_t>(model.size());
  const auto support = static_cast<std::uint32_t>(model.support_count);
  write_exact(os, &version, 4);
  write_exact(os, &count, 4);
  write_exact(os, &support, 4);

  for (const auto& c : model.components) {
    float buf[15];
    buf[0] = static_cast<float>(c.weight);
    for (int i = 0; i < 4; ++i) buf[1 + i] = static_cast<float>(c.mean[i]);
    int idx = 5;
    for (int r = 0; r < 4; ++r) {
      for (int col = r; col < 4; ++col) buf[idx++] = static_cast<float>(c.cov(r, col));
    }
    write_exact(os, buf, sizeof(buf));
  }
}

Gmm4 load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelIoError("cannot open " + path.string());
  char magic[4];
  read_exact(is, magic, 4);
  if (std::memcmp(magic, "SGMM", 4) != 0) throw ModelBadMagic();
  std::uint32_t version, count, support;
  read_exact(is, &version, 4);
  read_exact(is, &count, 4);
  read_exact(is, &support, 4);
  if (version != 1) throw ModelBadVersion();

  Gmm4 model;
  model.support_count = support;
  model.components.resize(count);
  for (auto& c : model.components) {
    float buf[15];
    read_exact(is, buf, sizeof(buf));
    c.weight = buf[0];
    for (int i = 0; i < 4; ++i) c.mean[i] = buf[1 + i];
    int idx = 5;
    for (int r = 0; r < 4; ++r) {
      for (int col = r; col < 4; ++col) {
        c.cov(r, col) = buf[idx];
        c.cov(col, r) = buf[idx];
        ++idx;
      }
    }
  }
  return model;
}

void export_ply(const MultimodalCloud& cloud, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "ply\nformat binary_little_endian 1.0\n"
     << "element vertex " << cloud.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\n"
     << "property uchar intensity\nend_header\n";
  for (Eigen::Index n = 0; n < cloud.size(); ++n) {
    float xyz[3] = {static_cast<float>(cloud.pts(n, 0)), static_cast<float>(cloud.pts(n, 1)),
                    static_cast<float>(cloud.pts(n, 2))};
    const auto gray = static_cast<std::uint8_t>(std::lround(cloud.pts(n, 3) * 255.0));
    write_exact(os, xyz, sizeof(xyz));
    write_exact(os, &gray, 1);
  }
}

MultimodalCloud import_ply(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());

  std::string line;
  Eigen::Index vertex_count = -1;
  std::vector<std::pair<std::string, std::string>> properties;  // (type, name)
  if (!std::getline(is, line) || line != "ply") throw std::runtime_error("ply: bad magic");
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      ls >> tok;
      if (tok != "binary_little_endian") throw std::runtime_error("ply: unsupported format");
    } else if (tok == "element") {
      std::string name;
      ls >> name >> vertex_count;
      if (name != "vertex") throw std::runtime_error("ply: unsupported element " + name);
    } else if (tok == "property") {
      std::string type, name;
      ls >> type >> name;
      properties.emplace_back(type, name);
    } else if (tok == "end_header") {
      break;
    }
  }
  if (vertex_count < 0) throw std::runtime_error("ply: missing vertex element");

  const std::vector<std::pair<std::string, std::string>> expected = {
      {"float", "x"}, {"float", "y"}, {"float", "z"}, {"uchar", "intensity"}};
  if (properties != expected) throw std::runtime_error("ply: unsupported vertex layout");

  MultimodalCloud cloud(vertex_count);
  for (Eigen::Index n = 0; n < vertex_count; ++n) {
    float xyz[3];
    std::uint8_t gray;
    is.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    is.read(reinterpret_cast<char*>(&gray), 1);
    if (!is) throw std::runtime_error("ply: truncated data");
    cloud.pts.row(n) << xyz[0], xyz[1], xyz[2], static_cast<double>(gray) / 255.0;
  }
  return cloud;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::filesystem::path base = path.parent_path();

  Manifest manifest;
  bool have_intrinsics = false;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    if (tok == "intrinsics") {
      auto& in = manifest.intrinsics;
      if (!(ls >> in.fx >> in.fy >> in.cx >> in.cy >> in.width >> in.height >> in.depth_scale)) {
        throw std::runtime_error("manifest: bad intrinsics line " + std::to_string(line_no));
      }
      in.validate();
      have_intrinsics = true;
    } else if (tok == "frame") {
      Manifest::Frame frame;
      std::string depth_path, intensity_path;
      if (!(ls >> depth_path >> intensity_path)) {
        throw std::runtime_error("manifest: bad frame line " + std::to_string(line_no));
      }
      double m[16];
      for (double& v : m) {
        if (!(ls >> v)) {
          throw std::runtime_error("manifest: bad pose on line " + std::to_string(line_no));
        }
      }
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) frame.pose.rotation(r, c) = m[4 * r + c];
        frame.pose.translation[r] = m[4 * r + 3];
      }
      if (!frame.pose.is_valid()) {
        throw std::runtime_error("manifest: non-rigid pose on line " + std::to_string(line_no));
      }
      const std::filesystem::path dp(depth_path);
      const std::filesystem::path ip(intensity_path);
      frame.depth_path = dp.is_absolute() ? dp : base / dp;
      frame.intensity_path = ip.is_absolute() ? ip : base / ip;
      manifest.frames.push_back(std::move(frame));
    } else {
      throw std::runtime_error("manifest: unknown record '" + tok + "' on line " +
                               std::to_string(line_no));
    }
  }
  if (!have_intrinsics) throw std::runtime_error("manifest: missing intrinsics record");
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  const auto& in = manifest.intrinsics;
  os.precision(17);
  os << "intrinsics " << in.fx << " " << in.fy << " " << in.cx << " " << in.cy << " " << in.width
     << " " << in.height << " " << in.depth_scale << "\n";
  const std::filesystem::path base = path.parent_path();
  for (const auto& frame : manifest.frames) {
    os << "frame " << frame.depth_path.lexically_proximate(base).string() << " "
       << frame.intensity_path.lexically_proximate(base).string();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) os << " " << frame.pose.rotation(r, c);
      os << " " << frame.pose.translation[r];
    }
    os << " 0 0 0 1\n";
  }
}

}  // namespace gmap
