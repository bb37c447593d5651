#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "hunter/geometry.hpp"
#include "hunter/rng.hpp"

namespace hunter {

// Patch-wise constrained RANSAC settings; defaults follow the tuned
// production values.
struct RansacConfig {
  double patch_size = 5.0;                      // meters, square patches
  Vec3 voxel_size{0.1, 0.1, 0.05};              // seed voxelization
  double inlier_threshold = 0.06;               // plane distance, meters
  int min_plane_points = 50;                    // accepted plane inlier floor
  double max_below_fraction = 0.20;             // below-plane points / inliers
  double max_below_mean_dist = 0.15;            // meters
  double max_tilt_deg = 25.0;                   // normal vs +z
  int confirm_reruns = 6;                       // extra constrained fits
  int iterations = 200;                         // RANSAC draws per fit
  std::uint64_t seed = 0;

  void validate() const;
};

struct Patch {
  std::int64_t ix = 0, iy = 0;          // grid coordinates
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
  std::vector<std::size_t> indices;     // into the source cloud
};

struct PlaneFit {
  Vec3 normal{0, 0, 1};  // unit, oriented upward
  double offset = 0.0;   // n . p = offset
  std::vector<std::size_t> inliers;
};

struct GroundPatch {
  std::int64_t ix = 0, iy = 0;
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
  PlaneFit plane;
};

struct GroundModel {
  std::vector<GroundPatch> patches;
  std::vector<std::size_t> ground_indices;  // sorted union over patches
  std::vector<Vec3> ground_points;          // positions of ground_indices

  bool empty() const { return ground_points.empty(); }
};

// Assign every in-range point to exactly one (x, y) patch; boundary points
// go to the lower-index patch. Returns the full patch grid covering the
// detection range.
std::vector<Patch> partition_patches(const PointCloud& cloud, const DetectionRange& range,
                                     const RansacConfig& cfg);

// Constrained RANSAC on one patch: candidate triples are drawn only from
// the lowest occupied voxel of each (x, y) voxel column; the best plane is
// accepted only if it passes the tilt / size / below-plane constraints.
std::optional<PlaneFit> fit_patch_ground(const PointCloud& cloud, const Patch& patch,
                                         const RansacConfig& cfg, Rng& rng);

// Per-patch fits (initial + confirm_reruns, each fully re-validated) whose
// accepted inlier sets are unioned; the recorded plane is the accepted run
// with the most inliers and the union is filtered to its inlier band.
GroundModel segment_ground(const PointCloud& cloud, const DetectionRange& range,
                           const RansacConfig& cfg);

// Two-stage draw: uniform range in [min, max] of ground-point ranges, then
// a uniform pick among points within +-band of the drawn value (falling
// back to the nearest-range points when the band is empty).
// Throws std::invalid_argument("no-ground") on an empty model.
Vec3 sample_insertion_point(const GroundModel& ground, Rng& rng, double band = 0.5);

// JSON: {patches: [{plane: [nx,ny,nz,d], inliers: [...]}], ground_indices: [...]}
void save_ground_model(const GroundModel& model, const std::filesystem::path& path);
GroundModel load_ground_model(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace hunter
