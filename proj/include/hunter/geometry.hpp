#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

namespace hunter {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class PointSource : std::uint8_t { scene = 0, synthetic = 1 };

// Unordered 3D points in the sensor frame. `sources` and `channels` are
// optional attributes; when present they must cover every point.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<PointSource> sources;
  std::vector<std::int32_t> channels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_sources() const { return !sources.empty(); }
  PointSource source_of(std::size_t i) const {
    return has_sources() ? sources[i] : PointSource::scene;
  }
};

// Wrap an angle to [-pi, pi).
double wrap_angle(double a);

// Wrap an innovation to (-pi, pi].
double wrap_innovation(double a);

// Oriented 3D box: center, (l, w, h) extents along the yawed x/y axes and
// z, yaw about +z in [-pi, pi).
struct BBox3D {
  Vec3 center{0, 0, 0};
  Vec3 dims{1, 1, 1};  // (l, w, h), strictly positive
  double yaw = 0.0;

  static BBox3D make(const Vec3& center, const Vec3& dims, double yaw);
  // BEV footprint corners, counter-clockwise.
  std::array<Eigen::Vector2d, 4> bev_corners() const;
};

// Rotation + translation; rotation orthonormal with det +1 (tol 1e-9).
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  bool is_valid(double tol = 1e-9) const;
  static RigidTransform yaw_about_z(double yaw);
};

// Axis ranges of the detection region.
struct DetectionRange {
  double x_min = 0, x_max = 0;
  double y_min = 0, y_max = 0;
  double z_min = 0, z_max = 0;

  bool contains(const Vec3& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min &&
           p.y() <= y_max && p.z() >= z_min && p.z() <= z_max;
  }
  bool contains_xy(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

// 1D grid bin with the shared tie rule: a value exactly on a bin's upper
// edge belongs to the lower bin; the lowest edge belongs to bin 0.
inline std::int64_t grid_bin(double v, double lo, double size) {
  const double f = (v - lo) / size;
  if (f <= 0.0) return 0;
  return static_cast<std::int64_t>(std::ceil(f)) - 1;
}

// Number of grid cells covering [lo, hi); tolerates FP jitter when the
// span is an exact multiple of the cell size.
inline std::int64_t grid_cell_count(double lo, double hi, double size) {
  return static_cast<std::int64_t>(std::ceil((hi - lo) / size - 1e-9));
}

// Tightest box with the given yaw containing all points.
// Throws std::invalid_argument("empty-instance") on an empty cloud.
BBox3D fit_bbox(const PointCloud& points, double yaw);

// Bird's-eye-view IoU of the two boxes' footprints, in [0, 1].
double bev_iou(const BBox3D& a, const BBox3D& b);

// Euclidean distance between box centers.
double center_distance(const BBox3D& a, const BBox3D& b);

// Pure translation aligning the asset's centroid (x, y) with the ground
// point and its lowest z with the ground z.
// Throws std::invalid_argument("empty-instance") on an empty cloud.
RigidTransform place_on_ground(const PointCloud& asset_points, const Vec3& ground_point);

// Area of a simple polygon (shoelace), vertices in order.
double polygon_area(const std::vector<Eigen::Vector2d>& poly);

// Intersection of two convex polygons (Sutherland-Hodgman).
std::vector<Eigen::Vector2d> clip_convex(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip);

}  // namespace hunter
