#include "hunter/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hunter {

namespace {
constexpr double kPi = std::numbers::pi;
}

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0) r += 2.0 * kPi;
  return r - kPi;
}

double wrap_innovation(double a) {
  const double r = wrap_angle(a);
  return r == -kPi ? kPi : r;
}

BBox3D BBox3D::make(const Vec3& center, const Vec3& dims, double yaw) {
  if (!(dims.x() > 0 && dims.y() > 0 && dims.z() > 0))
    throw std::invalid_argument("invalid-box: dims must be strictly positive");
  return BBox3D{center, dims, wrap_angle(yaw)};
}

std::array<Eigen::Vector2d, 4> BBox3D::bev_corners() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double hl = dims.x() * 0.5, hw = dims.y() * 0.5;
  const auto rot = [&](double x, double y) {
    return Eigen::Vector2d(center.x() + c * x - s * y, center.y() + s * x + c * y);
  };
  return {rot(hl, hw), rot(-hl, hw), rot(-hl, -hw), rot(hl, -hw)};
}

bool RigidTransform::is_valid(double tol) const {
  const Mat3 rr = rotation.transpose() * rotation;
  if ((rr - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform RigidTransform::yaw_about_z(double yaw) {
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  return t;
}

BBox3D fit_bbox(const PointCloud& points, double yaw) {
  if (points.empty()) throw std::invalid_argument("empty-instance");
  const double c = std::cos(yaw), s = std::sin(yaw);
  double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u;
  double lo_v = lo_u, hi_v = -lo_u;
  double lo_z = lo_u, hi_z = -lo_u;
  for (const Vec3& p : points.points) {
    // rotate by -yaw into the box frame
    const double u = c * p.x() + s * p.y();
    const double v = -s * p.x() + c * p.y();
    lo_u = std::min(lo_u, u);
    hi_u = std::max(hi_u, u);
    lo_v = std::min(lo_v, v);
    hi_v = std::max(hi_v, v);
    lo_z = std::min(lo_z, p.z());
    hi_z = std::max(hi_z, p.z());
  }
  const double cu = 0.5 * (lo_u + hi_u), cv = 0.5 * (lo_v + hi_v);
  Vec3 dims(hi_u - lo_u, hi_v - lo_v, hi_z - lo_z);
  // degenerate extents (single point, planar cloud) still yield a valid box
  for (int k = 0; k < 3; ++k) dims[k] = std::max(dims[k], 1e-9);
  const Vec3 center(c * cu - s * cv, s * cu + c * cv, 0.5 * (lo_z + hi_z));
  return BBox3D{center, dims, wrap_angle(yaw)};
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(a) * 0.5;
}

std::vector<Eigen::Vector2d> clip_convex(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip) {
  std::vector<Eigen::Vector2d> out = subject;
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Eigen::Vector2d a = clip[i];
    const Eigen::Vector2d b = clip[(i + 1) % clip.size()];
    const Eigen::Vector2d edge = b - a;
    const auto inside = [&](const Eigen::Vector2d& p) {
      // clip polygon is counter-clockwise; points on the edge count as inside
      return edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x()) >= 0.0;
    };
    const auto intersect = [&](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
      const Eigen::Vector2d d = q - p;
      const double denom = edge.x() * d.y() - edge.y() * d.x();
      const double t = (edge.x() * (a.y() - p.y()) - edge.y() * (a.x() - p.x())) / denom;
      return Eigen::Vector2d(p + t * d);
    };
    std::vector<Eigen::Vector2d> next;
    next.reserve(out.size() + 4);
    for (std::size_t j = 0; j < out.size(); ++j) {
      const Eigen::Vector2d& cur = out[j];
      const Eigen::Vector2d& prev = out[(j + out.size() - 1) % out.size()];
      const bool cur_in = inside(cur), prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) next.push_back(intersect(prev, cur));
        next.push_back(cur);
      } else if (prev_in) {
        next.push_back(intersect(prev, cur));
      }
    }
    out = std::move(next);
  }
  return out;
}

double bev_iou(const BBox3D& a, const BBox3D& b) {
  // identical footprints compare exactly
  if (a.center.x() == b.center.x() && a.center.y() == b.center.y() &&
      a.dims.x() == b.dims.x() && a.dims.y() == b.dims.y() && a.yaw == b.yaw)
    return 1.0;
  const auto ca = a.bev_corners();
  const auto cb = b.bev_corners();
  const std::vector<Eigen::Vector2d> pa(ca.begin(), ca.end());
  const std::vector<Eigen::Vector2d> pb(cb.begin(), cb.end());
  const double inter = polygon_area(clip_convex(pa, pb));
  const double area_a = a.dims.x() * a.dims.y();
  const double area_b = b.dims.x() * b.dims.y();
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_distance(const BBox3D& a, const BBox3D& b) {
  return (a.center - b.center).norm();
}

RigidTransform place_on_ground(const PointCloud& asset_points, const Vec3& ground_point) {
  if (asset_points.empty()) throw std::invalid_argument("empty-instance");
  double min_z = std::numeric_limits<double>::infinity();
  double cx = 0.0, cy = 0.0;
  for (const Vec3& p : asset_points.points) {
    min_z = std::min(min_z, p.z());
    cx += p.x();
    cy += p.y();
  }
  const double n = static_cast<double>(asset_points.size());
  RigidTransform t;
  t.translation = Vec3(ground_point.x() - cx / n, ground_point.y() - cy / n,
                       ground_point.z() - min_z);
  return t;
}

}  // namespace hunter
