#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "hunter/geometry.hpp"

namespace hunter {

// LiDAR beam geometry: H beam rows over a vertical FOV, W azimuth columns
// over [-180, 180) degrees.
struct LidarSpec {
  std::int32_t rows = 64;
  std::int32_t cols = 512;
  double min_elev_deg = -22.5;
  double max_elev_deg = 22.5;
  double max_range = 120.0;
  Vec3 origin{0, 0, 0};

  bool operator==(const LidarSpec&) const = default;
  void validate() const;  // throws std::invalid_argument
  double elev_bin_deg() const { return (max_elev_deg - min_elev_deg) / rows; }
  double azim_bin_deg() const { return 360.0 / cols; }
  // Bin-center ray direction of cell (i, j), unit length.
  Vec3 cell_direction(std::int32_t i, std::int32_t j) const;
};

// H x W grid of at-most-one LiDAR return per cell. Stored SoA so the merge
// kernel can stream it; unoccupied cells carry range +inf and zero point.
class RangeImage {
 public:
  explicit RangeImage(const LidarSpec& spec);

  const LidarSpec& spec() const { return spec_; }
  std::int32_t rows() const { return spec_.rows; }
  std::int32_t cols() const { return spec_.cols; }
  std::size_t size() const { return range_.size(); }

  std::size_t index(std::int32_t i, std::int32_t j) const {
    return static_cast<std::size_t>(i) * spec_.cols + j;
  }
  bool occupied(std::size_t idx) const { return occ_[idx] != 0; }
  bool occupied(std::int32_t i, std::int32_t j) const { return occ_[index(i, j)] != 0; }
  double range(std::size_t idx) const { return range_[idx]; }
  Vec3 point(std::size_t idx) const { return {x_[idx], y_[idx], z_[idx]}; }
  PointSource source(std::size_t idx) const { return static_cast<PointSource>(src_[idx]); }
  std::size_t occupied_count() const;

  void set_cell(std::size_t idx, const Vec3& p, double range, PointSource src);
  void clear_cell(std::size_t idx);

  const std::vector<double>& ranges() const { return range_; }
  const std::vector<double>& xs() const { return x_; }
  const std::vector<double>& ys() const { return y_; }
  const std::vector<double>& zs() const { return z_; }
  const std::vector<std::uint8_t>& occ() const { return occ_; }
  const std::vector<std::uint8_t>& srcs() const { return src_; }

  static constexpr double kEmptyRange = std::numeric_limits<double>::infinity();

 private:
  friend RangeImage merge(const RangeImage&, const RangeImage&);
  LidarSpec spec_;
  std::vector<double> range_, x_, y_, z_;
  std::vector<std::uint8_t> occ_, src_;
};

// Row/column of a point under the spec's binning, or false when the point
// falls outside the FOV or measuring range.
struct CellIndex {
  std::int32_t row = 0;
  std::int32_t col = 0;
  double range = 0.0;
};
bool project_point(const LidarSpec& spec, const Vec3& p, CellIndex& out);

// Project a cloud; cells keep their nearest return (range ties keep the
// earliest point in input order).
RangeImage project(const PointCloud& cloud, const LidarSpec& spec);

// Stored points of occupied cells, row-major, bit-identical coordinates.
PointCloud backproject(const RangeImage& image);

// Nearest-return merge of two images over the same spec (empty cells act
// as range +inf; ties keep the instance side `b`).
// Throws std::invalid_argument("spec-mismatch") on differing specs.
RangeImage merge(const RangeImage& scene, const RangeImage& instance);

// 1 - survivors/occupied for the instance image inside the merged image.
// Throws std::invalid_argument("spec-mismatch" / "empty-instance").
double occlusion_rate(const RangeImage& instance, const RangeImage& merged);

// Binary format: 8 little-endian float64 header fields
// (H, W, min_elev_deg, max_elev_deg, max_range, ox, oy, oz) followed by
// row-major cells of 1 occupancy byte + 3 little-endian float32 (x, y, z).
std::vector<std::uint8_t> serialize(const RangeImage& image);
RangeImage deserialize_range_image(const std::vector<std::uint8_t>& bytes);
void save_range_image(const RangeImage& image, const std::filesystem::path& path);
RangeImage load_range_image(const std::filesystem::path& path);

}  // namespace hunter
