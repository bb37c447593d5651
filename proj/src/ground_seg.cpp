#include "hunter/ground_seg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "hunter/simd/kernels.hpp"

namespace hunter {

namespace {
constexpr double kDegPerRad = 180.0 / std::numbers::pi;
}

void RansacConfig::validate() const {
  if (!(patch_size > 0) || !(inlier_threshold > 0) || min_plane_points <= 0 ||
      !(max_below_fraction > 0) || !(max_below_mean_dist > 0) || !(max_tilt_deg > 0) ||
      confirm_reruns < 0 || iterations <= 0 || !(voxel_size.minCoeff() > 0))
    throw std::invalid_argument("ransac-config: thresholds must be positive");
}

std::vector<Patch> partition_patches(const PointCloud& cloud, const DetectionRange& range,
                                     const RansacConfig& cfg) {
  cfg.validate();
  const auto nx = std::max<std::int64_t>(1, grid_cell_count(range.x_min, range.x_max, cfg.patch_size));
  const auto ny = std::max<std::int64_t>(1, grid_cell_count(range.y_min, range.y_max, cfg.patch_size));
  std::vector<Patch> patches(static_cast<std::size_t>(nx * ny));
  for (std::int64_t iy = 0; iy < ny; ++iy) {
    for (std::int64_t ix = 0; ix < nx; ++ix) {
      Patch& p = patches[static_cast<std::size_t>(iy * nx + ix)];
      p.ix = ix;
      p.iy = iy;
      p.x_lo = range.x_min + ix * cfg.patch_size;
      p.x_hi = range.x_min + (ix + 1) * cfg.patch_size;
      p.y_lo = range.y_min + iy * cfg.patch_size;
      p.y_hi = range.y_min + (iy + 1) * cfg.patch_size;
    }
  }
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const Vec3& p = cloud.points[k];
    if (!range.contains(p)) continue;
    const auto ix = std::min(grid_bin(p.x(), range.x_min, cfg.patch_size), nx - 1);
    const auto iy = std::min(grid_bin(p.y(), range.y_min, cfg.patch_size), ny - 1);
    patches[static_cast<std::size_t>(iy * nx + ix)].indices.push_back(k);
  }
  return patches;
}

namespace {

struct PatchSoA {
  std::vector<double> x, y, z;
  std::vector<std::size_t> seed_local;  // local indices eligible for sampling
};

PatchSoA build_patch_soa(const PointCloud& cloud, const Patch& patch,
                         const RansacConfig& cfg) {
  PatchSoA soa;
  const std::size_t n = patch.indices.size();
  soa.x.resize(n);
  soa.y.resize(n);
  soa.z.resize(n);
  double z_lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3& p = cloud.points[patch.indices[k]];
    soa.x[k] = p.x();
    soa.y[k] = p.y();
    soa.z[k] = p.z();
    z_lo = std::min(z_lo, p.z());
  }
  // lowest occupied voxel per (x, y) column seeds the sampling
  struct ColumnMin {
    std::int64_t vz;
    std::vector<std::size_t> members;
  };
  std::unordered_map<std::int64_t, ColumnMin> columns;
  const auto nvx = std::max<std::int64_t>(
      1, grid_cell_count(patch.x_lo, patch.x_hi, cfg.voxel_size.x()));
  for (std::size_t k = 0; k < n; ++k) {
    const auto vx = grid_bin(soa.x[k], patch.x_lo, cfg.voxel_size.x());
    const auto vy = grid_bin(soa.y[k], patch.y_lo, cfg.voxel_size.y());
    const auto vz = grid_bin(soa.z[k], z_lo, cfg.voxel_size.z());
    const std::int64_t key = vy * nvx + vx;
    auto [it, inserted] = columns.try_emplace(key, ColumnMin{vz, {}});
    if (!inserted) {
      if (vz < it->second.vz) {
        it->second.vz = vz;
        it->second.members.clear();
      } else if (vz > it->second.vz) {
        continue;
      }
    }
    it->second.members.push_back(k);
  }
  for (const auto& [key, col] : columns)
    soa.seed_local.insert(soa.seed_local.end(), col.members.begin(), col.members.end());
  std::sort(soa.seed_local.begin(), soa.seed_local.end());
  return soa;
}

std::optional<PlaneFit> fit_patch_ground_soa(const Patch& patch, const PatchSoA& soa,
                                             const RansacConfig& cfg, Rng& rng) {
  const std::size_t n = patch.indices.size();
  if (soa.seed_local.size() < 3) return std::nullopt;
  const auto& kernels = simd::active();

  Vec3 best_n{0, 0, 1};
  double best_d = 0.0;
  std::int64_t best_count = -1;
  for (int it = 0; it < cfg.iterations; ++it) {
    // draw a non-degenerate triple from the seed voxels
    Vec3 a, b, c;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      const std::size_t i0 = soa.seed_local[rng.uniform_index(soa.seed_local.size())];
      const std::size_t i1 = soa.seed_local[rng.uniform_index(soa.seed_local.size())];
      const std::size_t i2 = soa.seed_local[rng.uniform_index(soa.seed_local.size())];
      if (i0 == i1 || i0 == i2 || i1 == i2) continue;
      a = Vec3(soa.x[i0], soa.y[i0], soa.z[i0]);
      b = Vec3(soa.x[i1], soa.y[i1], soa.z[i1]);
      c = Vec3(soa.x[i2], soa.y[i2], soa.z[i2]);
      ok = ((b - a).cross(c - a)).norm() >= 1e-9;
    }
    if (!ok) continue;
    Vec3 normal = ((b - a).cross(c - a)).normalized();
    if (normal.z() < 0) normal = -normal;
    const double d = normal.dot(a);
    const auto stats = kernels.plane_stats(n, soa.x.data(), soa.y.data(), soa.z.data(),
                                           normal.x(), normal.y(), normal.z(), d,
                                           cfg.inlier_threshold);
    if (stats.inliers > best_count) {
      best_count = stats.inliers;
      best_n = normal;
      best_d = d;
    }
  }
  if (best_count < 0) return std::nullopt;

  const auto stats = kernels.plane_stats(n, soa.x.data(), soa.y.data(), soa.z.data(),
                                         best_n.x(), best_n.y(), best_n.z(), best_d,
                                         cfg.inlier_threshold);
  const double tilt = std::acos(std::clamp(best_n.z(), -1.0, 1.0)) * kDegPerRad;
  if (tilt >= cfg.max_tilt_deg) return std::nullopt;
  if (stats.inliers < cfg.min_plane_points) return std::nullopt;
  if (static_cast<double>(stats.below) >=
      cfg.max_below_fraction * static_cast<double>(stats.inliers))
    return std::nullopt;
  if (stats.below > 0 &&
      stats.below_sum / static_cast<double>(stats.below) >= cfg.max_below_mean_dist)
    return std::nullopt;

  PlaneFit fit;
  fit.normal = best_n;
  fit.offset = best_d;
  fit.inliers.reserve(static_cast<std::size_t>(stats.inliers));
  for (std::size_t k = 0; k < n; ++k) {
    const double sd = best_n.x() * soa.x[k] + best_n.y() * soa.y[k] +
                      best_n.z() * soa.z[k] - best_d;
    if (std::abs(sd) <= cfg.inlier_threshold) fit.inliers.push_back(patch.indices[k]);
  }
  return fit;
}

}  // namespace

std::optional<PlaneFit> fit_patch_ground(const PointCloud& cloud, const Patch& patch,
                                         const RansacConfig& cfg, Rng& rng) {
  cfg.validate();
  if (patch.indices.empty()) return std::nullopt;
  const PatchSoA soa = build_patch_soa(cloud, patch, cfg);
  return fit_patch_ground_soa(patch, soa, cfg, rng);
}

GroundModel segment_ground(const PointCloud& cloud, const DetectionRange& range,
                           const RansacConfig& cfg) {
  GroundModel model;
  const auto patches = partition_patches(cloud, range, cfg);
  for (std::size_t pi = 0; pi < patches.size(); ++pi) {
    const Patch& patch = patches[pi];
    if (patch.indices.empty()) continue;
    Rng rng(derive_seed(cfg.seed, pi));
    const PatchSoA soa = build_patch_soa(cloud, patch, cfg);

    auto first = fit_patch_ground_soa(patch, soa, cfg, rng);
    if (!first) continue;
    std::vector<PlaneFit> runs;
    runs.push_back(std::move(*first));
    for (int r = 0; r < cfg.confirm_reruns; ++r) {
      auto rerun = fit_patch_ground_soa(patch, soa, cfg, rng);
      if (rerun) runs.push_back(std::move(*rerun));
    }

    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
      if (runs[r].inliers.size() > runs[best].inliers.size()) best = r;

    std::vector<std::size_t> uni;
    for (const auto& run : runs)
      uni.insert(uni.end(), run.inliers.begin(), run.inliers.end());
    std::sort(uni.begin(), uni.end());
    uni.erase(std::unique(uni.begin(), uni.end()), uni.end());

    // the recorded plane is the strongest accepted run; keep the union
    // only where it stays within that plane's inlier band
    GroundPatch gp;
    gp.ix = patch.ix;
    gp.iy = patch.iy;
    gp.x_lo = patch.x_lo;
    gp.x_hi = patch.x_hi;
    gp.y_lo = patch.y_lo;
    gp.y_hi = patch.y_hi;
    gp.plane.normal = runs[best].normal;
    gp.plane.offset = runs[best].offset;
    for (const auto idx : uni) {
      const double sd = gp.plane.normal.dot(cloud.points[idx]) - gp.plane.offset;
      if (std::abs(sd) <= cfg.inlier_threshold) gp.plane.inliers.push_back(idx);
    }
    if (gp.plane.inliers.empty()) continue;
    model.ground_indices.insert(model.ground_indices.end(), gp.plane.inliers.begin(),
                                gp.plane.inliers.end());
    model.patches.push_back(std::move(gp));
  }
  std::sort(model.ground_indices.begin(), model.ground_indices.end());
  model.ground_indices.erase(
      std::unique(model.ground_indices.begin(), model.ground_indices.end()),
      model.ground_indices.end());
  model.ground_points.reserve(model.ground_indices.size());
  for (const auto idx : model.ground_indices) model.ground_points.push_back(cloud.points[idx]);
  return model;
}

Vec3 sample_insertion_point(const GroundModel& ground, Rng& rng, double band) {
  if (ground.empty()) throw std::invalid_argument("no-ground");
  const std::size_t n = ground.ground_points.size();
  std::vector<double> ranges(n);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < n; ++k) {
    ranges[k] = ground.ground_points[k].norm();
    lo = std::min(lo, ranges[k]);
    hi = std::max(hi, ranges[k]);
  }
  const double draw = rng.uniform(lo, hi);
  const double half = band * 0.5;
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) nearest = std::min(nearest, std::abs(ranges[k] - draw));
  const double cut = std::max(half, nearest + 1e-12);
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(ranges[k] - draw) <= cut) candidates.push_back(k);
  return ground.ground_points[candidates[rng.uniform_index(candidates.size())]];
}

void save_ground_model(const GroundModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["patches"] = nlohmann::json::array();
  for (const auto& gp : model.patches) {
    nlohmann::ordered_json jp;
    jp["plane"] = {gp.plane.normal.x(), gp.plane.normal.y(), gp.plane.normal.z(),
                   gp.plane.offset};
    jp["inliers"] = gp.plane.inliers;
    jp["ix"] = gp.ix;
    jp["iy"] = gp.iy;
    jp["bounds"] = {gp.x_lo, gp.x_hi, gp.y_lo, gp.y_hi};
    doc["patches"].push_back(std::move(jp));
  }
  doc["ground_indices"] = model.ground_indices;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << doc.dump(2) << "\n";
}

GroundModel load_ground_model(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in);
  GroundModel model;
  for (const auto& jp : doc.at("patches")) {
    GroundPatch gp;
    const auto& plane = jp.at("plane");
    gp.plane.normal = Vec3(plane.at(0), plane.at(1), plane.at(2));
    gp.plane.offset = plane.at(3);
    gp.plane.inliers = jp.at("inliers").get<std::vector<std::size_t>>();
    gp.ix = jp.value("ix", 0);
    gp.iy = jp.value("iy", 0);
    if (jp.contains("bounds")) {
      gp.x_lo = jp["bounds"].at(0);
      gp.x_hi = jp["bounds"].at(1);
      gp.y_lo = jp["bounds"].at(2);
      gp.y_hi = jp["bounds"].at(3);
    }
    model.patches.push_back(std::move(gp));
  }
  model.ground_indices = doc.at("ground_indices").get<std::vector<std::size_t>>();
  model.ground_points.reserve(model.ground_indices.size());
  for (const auto idx : model.ground_indices) {
    if (idx >= cloud.size()) throw std::runtime_error("ground model index out of range");
    model.ground_points.push_back(cloud.points[idx]);
  }
  return model;
}

}  // namespace hunter
