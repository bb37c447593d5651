#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hunter/geometry.hpp"
#include "hunter/rng.hpp"

using namespace hunter;

namespace {
constexpr double kPi = std::numbers::pi;

PointCloud cloud_of(std::initializer_list<Vec3> pts) {
  PointCloud c;
  c.points.assign(pts);
  return c;
}

PointCloud unit_cube_corners() {
  PointCloud c;
  for (int x = 0; x <= 1; ++x)
    for (int y = 0; y <= 1; ++y)
      for (int z = 0; z <= 1; ++z) c.points.emplace_back(x, y, z);
  return c;
}

// Monte-Carlo BEV IoU oracle, independent of the clipping implementation.
double mc_bev_iou(const BBox3D& a, const BBox3D& b, Rng& rng, std::size_t samples) {
  const auto inside = [](const BBox3D& box, double x, double y) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const double dx = x - box.center.x(), dy = y - box.center.y();
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return std::abs(u) <= box.dims.x() * 0.5 && std::abs(v) <= box.dims.y() * 0.5;
  };
  const double reach_a = 0.5 * std::hypot(a.dims.x(), a.dims.y());
  const double reach_b = 0.5 * std::hypot(b.dims.x(), b.dims.y());
  const double lo_x = std::min(a.center.x() - reach_a, b.center.x() - reach_b);
  const double hi_x = std::max(a.center.x() + reach_a, b.center.x() + reach_b);
  const double lo_y = std::min(a.center.y() - reach_a, b.center.y() - reach_b);
  const double hi_y = std::max(a.center.y() + reach_a, b.center.y() + reach_b);
  std::size_t n_inter = 0, n_union = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = rng.uniform(lo_x, hi_x);
    const double y = rng.uniform(lo_y, hi_y);
    const bool ia = inside(a, x, y), ib = inside(b, x, y);
    n_inter += ia && ib;
    n_union += ia || ib;
  }
  return n_union == 0 ? 0.0 : static_cast<double>(n_inter) / static_cast<double>(n_union);
}

BBox3D random_box(Rng& rng) {
  BBox3D b;
  b.center = Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-2, 2));
  b.dims = Vec3(rng.uniform(0.3, 3), rng.uniform(0.3, 3), rng.uniform(0.3, 3));
  b.yaw = rng.uniform(-kPi, kPi);
  return b;
}

}  // namespace

TEST_CASE("fit_bbox: unit cube at yaw 0") {
  const auto box = fit_bbox(unit_cube_corners(), 0.0);
  CHECK(box.center.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(box.center.y() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(box.center.z() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(box.dims.x() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(box.dims.y() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(box.dims.z() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(box.yaw == 0.0);
}

TEST_CASE("fit_bbox: unit cube at yaw pi/4 widens to sqrt(2)") {
  const auto box = fit_bbox(unit_cube_corners(), kPi / 4);
  CHECK(box.dims.x() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(box.dims.y() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(box.dims.z() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_bbox: recovers a known oriented box from samples") {
  Rng rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    const BBox3D truth = random_box(rng);
    PointCloud cloud;
    const double c = std::cos(truth.yaw), s = std::sin(truth.yaw);
    // include the extreme corners so the fitted extents are exact
    for (const double su : {-1.0, 1.0})
      for (const double sv : {-1.0, 1.0})
        for (const double sz : {-1.0, 1.0}) {
          const double u = su * truth.dims.x() * 0.5;
          const double v = sv * truth.dims.y() * 0.5;
          cloud.points.emplace_back(truth.center.x() + c * u - s * v,
                                    truth.center.y() + s * u + c * v,
                                    truth.center.z() + sz * truth.dims.z() * 0.5);
        }
    for (int k = 0; k < 1000; ++k) {
      const double u = rng.uniform(-0.5, 0.5) * truth.dims.x();
      const double v = rng.uniform(-0.5, 0.5) * truth.dims.y();
      const double z = rng.uniform(-0.5, 0.5) * truth.dims.z();
      cloud.points.emplace_back(truth.center.x() + c * u - s * v,
                                truth.center.y() + s * u + c * v, truth.center.z() + z);
    }
    const auto fitted = fit_bbox(cloud, truth.yaw);
    CHECK((fitted.center - truth.center).norm() < 1e-6);
    CHECK((fitted.dims - truth.dims).norm() < 1e-6);
  }
}

TEST_CASE("fit_bbox: all points inside, minimal at the given yaw, idempotent") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    PointCloud cloud;
    const int n = 1 + static_cast<int>(rng.uniform_index(40));
    for (int k = 0; k < n; ++k)
      cloud.points.emplace_back(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4));
    const double yaw = rng.uniform(-kPi, kPi);
    const auto box = fit_bbox(cloud, yaw);
    const double c = std::cos(yaw), s = std::sin(yaw);
    double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
    for (const auto& p : cloud.points) {
      const Vec3 d = p - box.center;
      const double u = c * d.x() + s * d.y();
      const double v = -s * d.x() + c * d.y();
      CHECK(std::abs(u) <= box.dims.x() * 0.5 + 1e-9);
      CHECK(std::abs(v) <= box.dims.y() * 0.5 + 1e-9);
      CHECK(std::abs(d.z()) <= box.dims.z() * 0.5 + 1e-9);
      lo_u = std::min(lo_u, u);
      hi_u = std::max(hi_u, u);
      lo_v = std::min(lo_v, v);
      hi_v = std::max(hi_v, v);
    }
    // minimality: extents match the rotated-frame spreads
    CHECK(box.dims.x() <= std::max(hi_u - lo_u, 1e-9) + 1e-9);
    CHECK(box.dims.y() <= std::max(hi_v - lo_v, 1e-9) + 1e-9);

    // refitting the box's own BEV corners reproduces the footprint
    PointCloud corners;
    for (const auto& xy : box.bev_corners())
      for (const double sz : {-0.5, 0.5})
        corners.points.emplace_back(xy.x(), xy.y(), box.center.z() + sz * box.dims.z());
    const auto refit = fit_bbox(corners, yaw);
    CHECK((refit.center - box.center).norm() < 1e-9);
    CHECK((refit.dims - box.dims).norm() < 1e-9);
  }
}

TEST_CASE("fit_bbox: empty input") {
  CHECK_THROWS_WITH_AS(fit_bbox(PointCloud{}, 0.0), "empty-instance", std::invalid_argument);
}

TEST_CASE("bev_iou: identity, disjoint, known overlap") {
  const auto a = BBox3D::make(Vec3(0, 0, 0), Vec3(1, 1, 1), 0.3);
  CHECK(bev_iou(a, a) == 1.0);

  const auto far = BBox3D::make(Vec3(10, 0, 0), Vec3(1, 1, 1), 0.0);
  const auto origin = BBox3D::make(Vec3(0, 0, 0), Vec3(1, 1, 1), 0.0);
  CHECK(bev_iou(origin, far) == 0.0);

  // two unit squares offset by 0.5 in x: intersection 0.5, union 1.5
  const auto shifted = BBox3D::make(Vec3(0.5, 0, 0), Vec3(1, 1, 1), 0.0);
  CHECK(bev_iou(origin, shifted) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("bev_iou: symmetric, bounded, matches Monte-Carlo oracle") {
  Rng rng(11);
  Rng mc_rng(12);
  for (int rep = 0; rep < 25; ++rep) {
    BBox3D a = random_box(rng);
    BBox3D b = random_box(rng);
    b.center.x() = a.center.x() + rng.uniform(-2, 2);
    b.center.y() = a.center.y() + rng.uniform(-2, 2);
    const double iou_ab = bev_iou(a, b);
    const double iou_ba = bev_iou(b, a);
    CHECK(iou_ab == doctest::Approx(iou_ba).epsilon(1e-12));
    CHECK(iou_ab >= 0.0);
    CHECK(iou_ab <= 1.0);
    const double mc = mc_bev_iou(a, b, mc_rng, 2000000);
    CHECK(std::abs(iou_ab - mc) < 0.01);
  }
}

TEST_CASE("center_distance: basics and triangle inequality") {
  const auto a = BBox3D::make(Vec3(0, 0, 0), Vec3(1, 1, 1), 0.0);
  const auto b = BBox3D::make(Vec3(3, 4, 0), Vec3(2, 1, 1), 1.0);
  CHECK(center_distance(a, a) == 0.0);
  CHECK(center_distance(a, b) == doctest::Approx(5.0).epsilon(1e-12));

  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto x = random_box(rng);
    const auto y = random_box(rng);
    const auto z = random_box(rng);
    CHECK(center_distance(x, y) == doctest::Approx((x.center - y.center).norm()).epsilon(1e-12));
    CHECK(center_distance(x, z) <= center_distance(x, y) + center_distance(y, z) + 1e-12);
  }
}

TEST_CASE("place_on_ground: moves lowest point onto the ground point") {
  // asset symmetric about its lowest point in (x, y)
  const auto asset = cloud_of({Vec3(0, 0, 0), Vec3(-0.5, -0.5, 1), Vec3(0.5, 0.5, 1)});
  const auto t = place_on_ground(asset, Vec3(2, 3, 0.1));
  CHECK(t.rotation.isApprox(Mat3::Identity()));
  CHECK(t.apply(Vec3(0, 0, 0)).isApprox(Vec3(2, 3, 0.1)));
}

TEST_CASE("place_on_ground: identity when already on target") {
  const auto asset = cloud_of({Vec3(2, 3, 0.1), Vec3(1.5, 2.5, 1), Vec3(2.5, 3.5, 1)});
  const auto t = place_on_ground(asset, Vec3(2, 3, 0.1));
  CHECK(t.translation.norm() < 1e-12);
}

TEST_CASE("place_on_ground: min-z matches ground z, never rotates") {
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    PointCloud asset;
    const int n = 1 + static_cast<int>(rng.uniform_index(30));
    for (int k = 0; k < n; ++k)
      asset.points.emplace_back(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec3 g(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-1, 1));
    const auto t = place_on_ground(asset, g);
    CHECK(t.rotation == Mat3::Identity());
    CHECK(t.is_valid());
    double min_z = 1e300, cx = 0, cy = 0;
    for (const auto& p : asset.points) {
      const Vec3 q = t.apply(p);
      min_z = std::min(min_z, q.z());
      cx += q.x();
      cy += q.y();
    }
    CHECK(min_z == doctest::Approx(g.z()).epsilon(1e-12));
    CHECK(cx / n == doctest::Approx(g.x()).epsilon(1e-9));
    CHECK(cy / n == doctest::Approx(g.y()).epsilon(1e-9));
  }
  CHECK_THROWS_WITH_AS(place_on_ground(PointCloud{}, Vec3(0, 0, 0)), "empty-instance",
                       std::invalid_argument);
}

TEST_CASE("wrap_angle ranges") {
  CHECK(wrap_angle(kPi) == doctest::Approx(-kPi));
  CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(wrap_innovation(kPi) == doctest::Approx(kPi));
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const double a = rng.uniform(-20, 20);
    const double w = wrap_angle(a);
    CHECK(w >= -kPi);
    CHECK(w < kPi);
    CHECK(std::abs(std::remainder(a - w, 2 * kPi)) < 1e-9);
  }
}
