#include "hunter/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hunter {

bool BevGrid::cell_of(double x, double y, std::int64_t& row, std::int64_t& col) const {
  if (x < x_min || x > x_max || y < y_min || y > y_max) return false;
  row = std::min(grid_bin(x, x_min, cell), rows() - 1);
  col = std::min(grid_bin(y, y_min, cell), cols() - 1);
  return true;
}

std::size_t Mask::count() const {
  std::size_t n = 0;
  for (const auto c : cells) n += c != 0;
  return n;
}

double MaskConfig::radius_for(BodyPart part) const {
  switch (part) {
    case BodyPart::trunk:
      return radius_trunk;
    case BodyPart::head:
      return radius_head;
    case BodyPart::left_arm:
    case BodyPart::right_arm:
      return radius_arms;
    default:
      return radius_legs;
  }
}

void MaskConfig::validate() const {
  if (!(vacancy_voxel_z > 0) || !(vacancy_z_max > vacancy_z_min) ||
      !(vacancy_empty_fraction > 0) || !(gaussian_overlap > 0) ||
      min_gaussian_radius <= 0 || !(expand_x > 0) || !(expand_y > 0) ||
      joint_min_points <= 0 || !(radius_trunk > 0) || !(radius_legs > 0) ||
      !(radius_head > 0) || !(radius_arms > 0))
    throw std::invalid_argument("mask-config: all fields must be positive");
}

Mask vacant_ground_mask(const PointCloud& cloud, const BevGrid& grid,
                        const MaskConfig& cfg) {
  cfg.validate();
  const auto n_z = std::max<std::int64_t>(
      1, grid_cell_count(cfg.vacancy_z_min, cfg.vacancy_z_max, cfg.vacancy_voxel_z));
  const auto cols = grid.cols();
  // occupancy bitmap per (bev cell, z voxel)
  std::vector<std::uint8_t> occ(grid.size() * static_cast<std::size_t>(n_z), 0);
  std::int64_t row, col;
  for (const Vec3& p : cloud.points) {
    if (p.z() < cfg.vacancy_z_min || p.z() > cfg.vacancy_z_max) continue;
    if (!grid.cell_of(p.x(), p.y(), row, col)) continue;
    const auto vz = std::min(grid_bin(p.z(), cfg.vacancy_z_min, cfg.vacancy_voxel_z), n_z - 1);
    occ[static_cast<std::size_t>((row * cols + col) * n_z + vz)] = 1;
  }
  Mask mask(grid);
  const double threshold = cfg.vacancy_empty_fraction * static_cast<double>(n_z);
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    std::int64_t empty = 0;
    for (std::int64_t v = 0; v < n_z; ++v)
      empty += occ[cell * static_cast<std::size_t>(n_z) + static_cast<std::size_t>(v)] == 0;
    mask.cells[cell] = static_cast<double>(empty) > threshold ? 1 : 0;
  }
  return mask;
}

Mask compose_training_mask(const Mask& m, const HeatmapGrid& y) {
  if (!(m.grid == y.grid)) throw std::invalid_argument("grid-mismatch");
  Mask out = m;
  for (std::size_t k = 0; k < out.cells.size(); ++k)
    if (y.values[k] > 0.0) out.cells[k] = 1;
  return out;
}

namespace {

// True when the cell center lies inside the yawed rectangle footprint.
bool center_in_footprint(const BBox3D& box, double min_l, double min_w, double cx,
                         double cy) {
  const double hl = std::max(box.dims.x(), min_l) * 0.5;
  const double hw = std::max(box.dims.y(), min_w) * 0.5;
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double dx = cx - box.center.x(), dy = cy - box.center.y();
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= hl && std::abs(v) <= hw;
}

}  // namespace

Mask update_mask(const Mask& m, const std::vector<BBox3D>& pseudo_labels,
                 const MaskConfig& cfg) {
  cfg.validate();
  const BevGrid& grid = m.grid;
  Mask p_union(grid);
  for (const auto& box : pseudo_labels) {
    // conservative cell window around the expanded footprint
    const double hx = 0.5 * std::hypot(std::max(box.dims.x(), cfg.expand_x),
                                       std::max(box.dims.y(), cfg.expand_y));
    const auto r_lo = std::max<std::int64_t>(0, grid_bin(box.center.x() - hx, grid.x_min, grid.cell) - 1);
    const auto r_hi = std::min<std::int64_t>(grid.rows() - 1, grid_bin(box.center.x() + hx, grid.x_min, grid.cell) + 1);
    const auto c_lo = std::max<std::int64_t>(0, grid_bin(box.center.y() - hx, grid.y_min, grid.cell) - 1);
    const auto c_hi = std::min<std::int64_t>(grid.cols() - 1, grid_bin(box.center.y() + hx, grid.y_min, grid.cell) + 1);
    for (std::int64_t r = r_lo; r <= r_hi; ++r)
      for (std::int64_t c = c_lo; c <= c_hi; ++c)
        if (center_in_footprint(box, cfg.expand_x, cfg.expand_y, grid.cell_center_x(r),
                                grid.cell_center_y(c)))
          p_union.set(r, c, true);
  }
  Mask out(grid);
  for (std::size_t k = 0; k < out.cells.size(); ++k)
    out.cells[k] = (m.cells[k] != 0 || p_union.cells[k] == 0) ? 1 : 0;
  return out;
}

std::int64_t gaussian_radius_cells(double len_cells, double wid_cells, double overlap,
                                   std::int64_t floor_cells) {
  const double h = len_cells, w = wid_cells;
  // smallest of the three standard min-overlap bounds
  const double a1 = 1.0, b1 = h + w, c1 = w * h * (1 - overlap) / (1 + overlap);
  const double r1 = (b1 - std::sqrt(std::max(0.0, b1 * b1 - 4 * a1 * c1))) / (2 * a1);
  const double a2 = 4.0, b2 = 2 * (h + w), c2 = (1 - overlap) * w * h;
  const double r2 = (b2 - std::sqrt(std::max(0.0, b2 * b2 - 4 * a2 * c2))) / (2 * a2);
  const double a3 = 4 * overlap, b3 = -2 * overlap * (h + w),
               c3 = (overlap - 1) * w * h;
  const double r3 = (-b3 + std::sqrt(std::max(0.0, b3 * b3 - 4 * a3 * c3))) / (2 * a3);
  const double r = std::min({r1, r2, r3});
  return std::max<std::int64_t>(floor_cells, static_cast<std::int64_t>(r));
}

HeatmapGrid render_heatmap(const std::vector<BBox3D>& labels, const BevGrid& grid,
                           const MaskConfig& cfg) {
  cfg.validate();
  HeatmapGrid hm(grid);
  const auto cols = grid.cols();
  for (const auto& box : labels) {
    std::int64_t cr, cc;
    if (!grid.cell_of(box.center.x(), box.center.y(), cr, cc)) continue;
    const auto radius = gaussian_radius_cells(box.dims.x() / grid.cell,
                                              box.dims.y() / grid.cell,
                                              cfg.gaussian_overlap, cfg.min_gaussian_radius);
    const double sigma = (2.0 * static_cast<double>(radius) + 1.0) / 6.0;
    const double denom = 2.0 * sigma * sigma;
    for (std::int64_t dr = -radius; dr <= radius; ++dr) {
      const std::int64_t r = cr + dr;
      if (r < 0 || r >= grid.rows()) continue;
      for (std::int64_t dc = -radius; dc <= radius; ++dc) {
        const std::int64_t c = cc + dc;
        if (c < 0 || c >= cols) continue;
        const double g = (dr == 0 && dc == 0)
                             ? 1.0
                             : std::exp(-static_cast<double>(dr * dr + dc * dc) / denom);
        auto& cell = hm.values[static_cast<std::size_t>(r * cols + c)];
        cell = std::max(cell, g);
      }
    }
  }
  return hm;
}

JointSet visible_joints(const std::array<AssetJoint, 6>& joints,
                        const PointCloud& instance_points, const MaskConfig& cfg) {
  cfg.validate();
  JointSet set;
  set.reserve(6);
  for (const auto& joint : joints) {
    const double radius = cfg.radius_for(joint.part);
    const double r2 = radius * radius;
    int count = 0;
    for (const Vec3& p : instance_points.points)
      if ((p - joint.position).squaredNorm() <= r2) ++count;
    set.push_back(VisibleJoint{joint.part, joint.position,
                               count >= cfg.joint_min_points, count});
  }
  return set;
}

namespace {

struct RasterHeader {
  BevGrid grid;
  std::uint32_t rows = 0, cols = 0;
};

void write_header(std::ofstream& out, const BevGrid& grid) {
  const double fields[5] = {grid.x_min, grid.x_max, grid.y_min, grid.y_max, grid.cell};
  out.write(reinterpret_cast<const char*>(fields), sizeof(fields));
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(grid.rows()),
                                 static_cast<std::uint32_t>(grid.cols())};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
}

RasterHeader read_header(std::ifstream& in, const std::filesystem::path& path) {
  RasterHeader h;
  double fields[5];
  std::uint32_t dims[2];
  in.read(reinterpret_cast<char*>(fields), sizeof(fields));
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in) throw std::runtime_error("truncated raster file " + path.string());
  h.grid = BevGrid{fields[0], fields[1], fields[2], fields[3], fields[4]};
  h.rows = dims[0];
  h.cols = dims[1];
  if (h.rows != static_cast<std::uint32_t>(h.grid.rows()) ||
      h.cols != static_cast<std::uint32_t>(h.grid.cols()))
    throw std::runtime_error("raster header dims mismatch in " + path.string());
  return h;
}

}  // namespace

void save_mask(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  write_header(out, mask.grid);
  std::vector<std::uint8_t> packed((mask.cells.size() + 7) / 8, 0);
  for (std::size_t k = 0; k < mask.cells.size(); ++k)
    if (mask.cells[k]) packed[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  out.write(reinterpret_cast<const char*>(packed.data()),
            static_cast<std::streamsize>(packed.size()));
}

Mask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto h = read_header(in, path);
  Mask mask(h.grid);
  std::vector<std::uint8_t> packed((mask.cells.size() + 7) / 8, 0);
  in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!in) throw std::runtime_error("truncated mask file " + path.string());
  for (std::size_t k = 0; k < mask.cells.size(); ++k)
    mask.cells[k] = (packed[k / 8] >> (k % 8)) & 1u;
  return mask;
}

void save_heatmap(const HeatmapGrid& heatmap, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  write_header(out, heatmap.grid);
  std::vector<float> payload(heatmap.values.size());
  for (std::size_t k = 0; k < payload.size(); ++k)
    payload[k] = static_cast<float>(heatmap.values[k]);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

HeatmapGrid load_heatmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto h = read_header(in, path);
  HeatmapGrid hm(h.grid);
  std::vector<float> payload(hm.values.size());
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated heatmap file " + path.string());
  for (std::size_t k = 0; k < payload.size(); ++k) hm.values[k] = payload[k];
  return hm;
}

}  // namespace hunter
