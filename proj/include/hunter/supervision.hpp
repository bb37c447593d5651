#pragma once

#include <filesystem>
#include <vector>

#include "hunter/geometry.hpp"
#include "hunter/lidar_sim.hpp"

namespace hunter {

// Bird's-eye-view raster geometry: rows follow x, columns follow y.
struct BevGrid {
  double x_min = -25.6, x_max = 25.6;
  double y_min = -25.6, y_max = 25.6;
  double cell = 0.2;

  bool operator==(const BevGrid&) const = default;
  std::int64_t rows() const { return grid_cell_count(x_min, x_max, cell); }
  std::int64_t cols() const { return grid_cell_count(y_min, y_max, cell); }
  std::size_t size() const { return static_cast<std::size_t>(rows() * cols()); }
  // Cell of a BEV position; false when outside the grid.
  bool cell_of(double x, double y, std::int64_t& row, std::int64_t& col) const;
  double cell_center_x(std::int64_t row) const { return x_min + (row + 0.5) * cell; }
  double cell_center_y(std::int64_t col) const { return y_min + (col + 0.5) * cell; }
};

struct Mask {
  BevGrid grid;
  std::vector<std::uint8_t> cells;  // rows * cols, row-major

  explicit Mask(const BevGrid& g = {}) : grid(g), cells(g.size(), 0) {}
  bool at(std::int64_t row, std::int64_t col) const {
    return cells[static_cast<std::size_t>(row * grid.cols() + col)] != 0;
  }
  void set(std::int64_t row, std::int64_t col, bool v) {
    cells[static_cast<std::size_t>(row * grid.cols() + col)] = v ? 1 : 0;
  }
  std::size_t count() const;
};

struct HeatmapGrid {
  BevGrid grid;
  std::vector<double> values;  // in [0, 1], row-major

  explicit HeatmapGrid(const BevGrid& g = {}) : grid(g), values(g.size(), 0.0) {}
  double at(std::int64_t row, std::int64_t col) const {
    return values[static_cast<std::size_t>(row * grid.cols() + col)];
  }
};

struct VisibleJoint {
  BodyPart part;
  Vec3 position;
  bool visible = false;
  int support_points = 0;
};
using JointSet = std::vector<VisibleJoint>;

struct MaskConfig {
  // vacancy test
  double vacancy_z_min = 0.0;
  double vacancy_z_max = 2.5;
  double vacancy_voxel_z = 0.25;
  double vacancy_empty_fraction = 0.8;  // vacant iff empty voxels exceed this share
  // heatmap targets
  double gaussian_overlap = 0.7;
  std::int64_t min_gaussian_radius = 2;  // cells
  // stage-3 mask update
  double expand_x = 2.0;  // minimum expanded footprint, meters
  double expand_y = 2.0;
  // joint visibility
  int joint_min_points = 10;
  double radius_trunk = 0.4;
  double radius_legs = 0.22;
  double radius_head = 0.3;
  double radius_arms = 0.15;

  double radius_for(BodyPart part) const;
  void validate() const;
};

// A BEV cell is vacant ground iff the share of empty z-voxels above it
// exceeds the configured fraction.
Mask vacant_ground_mask(const PointCloud& cloud, const BevGrid& grid, const MaskConfig& cfg);

// M* = M or (y > 0). Throws std::invalid_argument("grid-mismatch").
Mask compose_training_mask(const Mask& m, const HeatmapGrid& y);

// M' = M or not(P), P = union of expanded pseudo-label footprints.
Mask update_mask(const Mask& m, const std::vector<BBox3D>& pseudo_labels,
                 const MaskConfig& cfg);

// Center-heatmap targets: one Gaussian per label, per-cell max, exact 1.0
// at center cells.
HeatmapGrid render_heatmap(const std::vector<BBox3D>& labels, const BevGrid& grid,
                           const MaskConfig& cfg);

// Minimum-overlap Gaussian radius in cells (floored by cfg).
std::int64_t gaussian_radius_cells(double len_cells, double wid_cells, double overlap,
                                   std::int64_t floor_cells);

// A joint is visible iff at least cfg.joint_min_points instance points lie
// within its part radius.
JointSet visible_joints(const std::array<AssetJoint, 6>& joints,
                        const PointCloud& instance_points, const MaskConfig& cfg);

// Binary rasters: float64 LE header (x_min, x_max, y_min, y_max, cell)
// + uint32 LE rows, cols; masks pack row-major bits LSB-first, heatmaps
// store row-major float32 LE.
void save_mask(const Mask& mask, const std::filesystem::path& path);
Mask load_mask(const std::filesystem::path& path);
void save_heatmap(const HeatmapGrid& heatmap, const std::filesystem::path& path);
HeatmapGrid load_heatmap(const std::filesystem::path& path);

}  // namespace hunter
