#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>

#include "hunter/ground_seg.hpp"
#include "hunter/rng.hpp"

using namespace hunter;

namespace {
constexpr double kPi = std::numbers::pi;

const DetectionRange kRange{-10, 10, -10, 10, -5, 5};

PointCloud plane_cloud(Rng& rng, std::size_t n, double sigma, double z0 = 0.0,
                       double tilt = 0.0, double extent = 9.5) {
  PointCloud cloud;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = rng.uniform(-extent, extent);
    const double y = rng.uniform(-extent, extent);
    cloud.points.emplace_back(x, y, z0 + x * std::tan(tilt) + sigma * gaussian(rng));
  }
  return cloud;
}

void add_box(PointCloud& cloud, Rng& rng, const Vec3& center, double half, double height,
             std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const int face = static_cast<int>(rng.uniform_index(4));
    const double u = rng.uniform(-half, half);
    const double z = rng.uniform(0.0, height);
    Vec3 p = center;
    switch (face) {
      case 0: p += Vec3(half, u, z); break;
      case 1: p += Vec3(-half, u, z); break;
      case 2: p += Vec3(u, half, z); break;
      default: p += Vec3(u, -half, z); break;
    }
    cloud.points.push_back(p);
  }
}

}  // namespace

TEST_CASE("partition_patches: single occupied patch and boundary tie") {
  RansacConfig cfg;
  PointCloud cloud;
  cloud.points.emplace_back(-9.0, -9.0, 0.0);
  cloud.points.emplace_back(-6.0, -7.0, 0.0);
  auto patches = partition_patches(cloud, kRange, cfg);
  REQUIRE(patches.size() == 16);  // 20 m / 5 m per side
  std::size_t nonempty = 0;
  for (const auto& p : patches) nonempty += !p.indices.empty();
  CHECK(nonempty == 1);
  CHECK(patches[0].indices.size() == 2);

  // a point exactly on the x = -5 boundary belongs to the lower-index patch
  PointCloud edge;
  edge.points.emplace_back(-5.0, -9.0, 0.0);
  patches = partition_patches(edge, kRange, cfg);
  CHECK(patches[0].indices.size() == 1);
  CHECK(patches[1].indices.empty());
}

TEST_CASE("partition_patches: uniform cloud matches a histogram oracle") {
  RansacConfig cfg;
  Rng rng(17);
  PointCloud cloud;
  for (int k = 0; k < 4000; ++k)
    cloud.points.emplace_back(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-1, 1));
  const auto patches = partition_patches(cloud, kRange, cfg);
  REQUIRE(patches.size() == 16);
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> histogram;
  for (const auto& p : cloud.points) {
    const auto ix = std::min<std::int64_t>(3, grid_bin(p.x(), -10.0, 5.0));
    const auto iy = std::min<std::int64_t>(3, grid_bin(p.y(), -10.0, 5.0));
    ++histogram[{ix, iy}];
  }
  std::size_t assigned = 0;
  for (const auto& p : patches) {
    CHECK(p.indices.size() == histogram[{p.ix, p.iy}]);
    assigned += p.indices.size();
  }
  CHECK(assigned == cloud.size());
}

TEST_CASE("fit_patch_ground: noiseless plane is recovered with all inliers") {
  RansacConfig cfg;
  Rng gen(23);
  const auto cloud = plane_cloud(gen, 200, 0.0, 0.0, 0.0, 2.4);
  const auto patches = partition_patches(cloud, DetectionRange{-2.5, 2.5, -2.5, 2.5, -5, 5}, cfg);
  REQUIRE(patches.size() == 1);
  Rng rng(1);
  const auto fit = fit_patch_ground(cloud, patches[0], cfg, rng);
  REQUIRE(fit.has_value());
  CHECK(fit->inliers.size() == cloud.size());
  CHECK(std::abs(fit->normal.z()) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit->offset == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("fit_patch_ground: tilt above 25 degrees is rejected") {
  RansacConfig cfg;
  Rng gen(29);
  const auto cloud = plane_cloud(gen, 300, 0.005, 0.0, 30.0 * kPi / 180.0, 2.4);
  const auto patches = partition_patches(cloud, DetectionRange{-2.5, 2.5, -2.5, 2.5, -5, 5}, cfg);
  Rng rng(2);
  CHECK(!fit_patch_ground(cloud, patches[0], cfg, rng).has_value());
}

TEST_CASE("fit_patch_ground: fewer than min_plane_points is rejected") {
  RansacConfig cfg;
  Rng gen(31);
  const auto cloud = plane_cloud(gen, 40, 0.0, 0.0, 0.0, 2.4);
  const auto patches = partition_patches(cloud, DetectionRange{-2.5, 2.5, -2.5, 2.5, -5, 5}, cfg);
  Rng rng(3);
  CHECK(!fit_patch_ground(cloud, patches[0], cfg, rng).has_value());
}

TEST_CASE("fit_patch_ground: too many points below the plane is rejected") {
  RansacConfig cfg;
  Rng gen(37);
  // a level surface plus a dense under-floor cluster more than 20% its size
  PointCloud cloud = plane_cloud(gen, 300, 0.01, 0.5, 0.0, 2.4);
  for (int k = 0; k < 120; ++k)
    cloud.points.emplace_back(gen.uniform(-2.4, 2.4), gen.uniform(-2.4, 2.4),
                              gen.uniform(-0.8, -0.4));
  const auto patches = partition_patches(cloud, DetectionRange{-2.5, 2.5, -2.5, 2.5, -5, 5}, cfg);
  Rng rng(4);
  // seeding from the lowest voxels latches onto the under-floor cluster or,
  // when the fit reaches the surface, fails the below-fraction constraint
  const auto fit = fit_patch_ground(cloud, patches[0], cfg, rng);
  if (fit.has_value()) {
    const auto below = [&](const Vec3& p) {
      return fit->normal.dot(p) - fit->offset < -cfg.inlier_threshold;
    };
    std::size_t n_below = 0;
    for (const auto& p : cloud.points) n_below += below(p);
    CHECK(static_cast<double>(n_below) <
          cfg.max_below_fraction * static_cast<double>(fit->inliers.size()));
  }
}

TEST_CASE("segment_ground: flat scene with clutter, recall/precision >= 0.95") {
  RansacConfig cfg;
  cfg.seed = 404;
  Rng gen(41);
  PointCloud cloud = plane_cloud(gen, 12000, 0.02);
  const std::size_t n_ground = cloud.size();
  for (int b = 0; b < 5; ++b)
    add_box(cloud, gen, Vec3(gen.uniform(-8, 8), gen.uniform(-8, 8), 0.0), 0.5, 1.5, 400);
  const auto model = segment_ground(cloud, kRange, cfg);
  std::size_t tp = 0, fp = 0;
  for (const auto idx : model.ground_indices) (idx < n_ground ? tp : fp)++;
  const double recall = static_cast<double>(tp) / static_cast<double>(n_ground);
  const double precision =
      static_cast<double>(tp) / static_cast<double>(model.ground_indices.size());
  CHECK(recall >= 0.95);
  CHECK(precision >= 0.95);
}

TEST_CASE("segment_ground: empty cloud gives an empty model") {
  RansacConfig cfg;
  const auto model = segment_ground(PointCloud{}, kRange, cfg);
  CHECK(model.empty());
  CHECK(model.patches.empty());
}

TEST_CASE("segment_ground: two-level terrace fits per-patch planes") {
  RansacConfig cfg;
  cfg.seed = 7;
  Rng gen(43);
  PointCloud cloud;
  for (int k = 0; k < 4000; ++k)
    cloud.points.emplace_back(gen.uniform(-9.5, -0.5), gen.uniform(-9.5, 9.5),
                              0.01 * gaussian(gen));
  for (int k = 0; k < 4000; ++k)
    cloud.points.emplace_back(gen.uniform(0.5, 9.5), gen.uniform(-9.5, 9.5),
                              0.5 + 0.01 * gaussian(gen));
  const auto model = segment_ground(cloud, kRange, cfg);
  REQUIRE(!model.patches.empty());
  for (const auto& gp : model.patches) {
    const double expected = gp.x_hi <= 0 ? 0.0 : 0.5;
    // plane height evaluated at the patch center (offset alone shifts with tilt)
    const double cx = 0.5 * (gp.x_lo + gp.x_hi), cy = 0.5 * (gp.y_lo + gp.y_hi);
    const double z_pred =
        (gp.plane.offset - gp.plane.normal.x() * cx - gp.plane.normal.y() * cy) /
        gp.plane.normal.z();
    CHECK(std::abs(z_pred - expected) < 0.05);
  }
  CHECK(model.ground_indices.size() > 7000);
}

TEST_CASE("segment_ground: deterministic, constraint-clean, range-cropped") {
  RansacConfig cfg;
  cfg.seed = 1234;
  Rng gen(47);
  PointCloud cloud = plane_cloud(gen, 6000, 0.02);
  add_box(cloud, gen, Vec3(2, 2, 0), 0.4, 2.0, 300);
  cloud.points.emplace_back(50.0, 50.0, 0.0);  // outside the detection range
  const std::size_t out_idx = cloud.size() - 1;

  const auto m1 = segment_ground(cloud, kRange, cfg);
  const auto m2 = segment_ground(cloud, kRange, cfg);
  CHECK(m1.ground_indices == m2.ground_indices);
  for (const auto& gp1 : m1.patches) CHECK(!gp1.plane.inliers.empty());

  for (const auto& gp : m1.patches) {
    CHECK(std::abs(gp.plane.normal.norm() - 1.0) < 1e-9);
    CHECK(std::acos(std::clamp(gp.plane.normal.z(), -1.0, 1.0)) < 25.0 * kPi / 180.0);
    CHECK(gp.plane.inliers.size() >= static_cast<std::size_t>(cfg.min_plane_points));
    for (const auto idx : gp.plane.inliers)
      CHECK(std::abs(gp.plane.normal.dot(cloud.points[idx]) - gp.plane.offset) <=
            cfg.inlier_threshold);
  }
  for (const auto idx : m1.ground_indices) CHECK(idx != out_idx);
}

TEST_CASE("sample_insertion_point: membership, single point, two-ring frequencies") {
  GroundModel single;
  single.ground_indices = {0};
  single.ground_points = {Vec3(1, 2, 0)};
  Rng rng(51);
  CHECK(sample_insertion_point(single, rng) == Vec3(1, 2, 0));

  GroundModel empty;
  CHECK_THROWS_WITH_AS(sample_insertion_point(empty, rng), "no-ground",
                       std::invalid_argument);

  // ring of points at ranges 5 and 50: two-stage sampling picks each ring
  // with roughly equal frequency
  GroundModel rings;
  for (int k = 0; k < 100; ++k) {
    const double a = 2 * kPi * k / 100.0;
    rings.ground_points.emplace_back(5 * std::cos(a), 5 * std::sin(a), 0.0);
    rings.ground_points.emplace_back(50 * std::cos(a), 50 * std::sin(a), 0.0);
    rings.ground_indices.push_back(2 * k);
    rings.ground_indices.push_back(2 * k + 1);
  }
  std::size_t near = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k)
    near += sample_insertion_point(rings, rng).norm() < 20.0;
  const double share = static_cast<double>(near) / draws;
  CHECK(share > 0.45);
  CHECK(share < 0.55);

  std::set<std::array<double, 3>> members;
  for (const auto& p : rings.ground_points) members.insert({p.x(), p.y(), p.z()});
  for (int k = 0; k < 100; ++k) {
    const Vec3 p = sample_insertion_point(rings, rng);
    CHECK(members.count({p.x(), p.y(), p.z()}) == 1);
  }
}

TEST_CASE("ground model JSON round trip") {
  RansacConfig cfg;
  cfg.seed = 9;
  Rng gen(53);
  PointCloud cloud = plane_cloud(gen, 3000, 0.02);
  const auto model = segment_ground(cloud, kRange, cfg);
  REQUIRE(!model.empty());
  const auto path = std::filesystem::temp_directory_path() / "ground_rt.json";
  save_ground_model(model, path);
  const auto loaded = load_ground_model(path, cloud);
  CHECK(loaded.ground_indices == model.ground_indices);
  REQUIRE(loaded.patches.size() == model.patches.size());
  for (std::size_t k = 0; k < model.patches.size(); ++k) {
    CHECK(loaded.patches[k].plane.inliers == model.patches[k].plane.inliers);
    CHECK((loaded.patches[k].plane.normal - model.patches[k].plane.normal).norm() < 1e-15);
  }
  std::filesystem::remove(path);
}
