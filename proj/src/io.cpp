#include "hunter/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hunter {

void write_point_cloud_bin(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  std::vector<float> row(4);
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    row[0] = static_cast<float>(cloud.points[k].x());
    row[1] = static_cast<float>(cloud.points[k].y());
    row[2] = static_cast<float>(cloud.points[k].z());
    row[3] = cloud.has_sources() ? static_cast<float>(cloud.sources[k]) : 0.0f;
    out.write(reinterpret_cast<const char*>(row.data()), 16);
  }
}

PointCloud read_point_cloud_bin(const std::filesystem::path& path, bool extra_is_source) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % 16 != 0)
    throw std::runtime_error("malformed point cloud (size not a multiple of 16): " +
                             path.string());
  const std::size_t n = bytes / 16;
  PointCloud cloud;
  cloud.points.reserve(n);
  if (extra_is_source) cloud.sources.reserve(n);
  float row[4];
  for (std::size_t k = 0; k < n; ++k) {
    in.read(reinterpret_cast<char*>(row), 16);
    if (!in) throw std::runtime_error("truncated point cloud: " + path.string());
    cloud.points.emplace_back(row[0], row[1], row[2]);
    if (extra_is_source)
      cloud.sources.push_back(row[3] != 0.0f ? PointSource::synthetic : PointSource::scene);
  }
  return cloud;
}

PointCloud read_xyz_ascii(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double x, y, z;
    if (ls >> x >> y >> z) cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t k = 0; k < size; ++k) {
    h ^= bytes[k];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& text) { return fnv1a64(text.data(), text.size()); }

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const auto got = in.gcount();
    for (std::streamsize k = 0; k < got; ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace hunter
