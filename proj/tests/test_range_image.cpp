#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "hunter/range_image.hpp"
#include "hunter/rng.hpp"

using namespace hunter;

namespace {

const LidarSpec kSpec{8, 16, -20.0, 20.0, 50.0, Vec3(0, 0, 0)};

Vec3 point_in_cell(const LidarSpec& spec, std::int32_t i, std::int32_t j, double range) {
  return spec.origin + range * spec.cell_direction(i, j);
}

// random image with occupancy density in [0, 1]
RangeImage random_image(const LidarSpec& spec, Rng& rng, double density) {
  RangeImage img(spec);
  for (std::int32_t i = 0; i < spec.rows; ++i)
    for (std::int32_t j = 0; j < spec.cols; ++j)
      if (rng.uniform(0, 1) < density) {
        const double r = rng.uniform(1.0, spec.max_range);
        img.set_cell(img.index(i, j), point_in_cell(spec, i, j, r), r,
                     rng.uniform(0, 1) < 0.5 ? PointSource::scene : PointSource::synthetic);
      }
  return img;
}

// per-cell brute-force nearest-return oracle (empty treated as +inf,
// ties keep the instance side)
void check_merge_against_oracle(const RangeImage& a, const RangeImage& b,
                                const RangeImage& merged) {
  for (std::size_t idx = 0; idx < merged.size(); ++idx) {
    const double da = a.occupied(idx) ? a.range(idx) : RangeImage::kEmptyRange;
    const double db = b.occupied(idx) ? b.range(idx) : RangeImage::kEmptyRange;
    if (da == RangeImage::kEmptyRange && db == RangeImage::kEmptyRange) {
      REQUIRE(!merged.occupied(idx));
      continue;
    }
    const RangeImage& winner = (da < db) ? a : b;
    REQUIRE(merged.occupied(idx));
    REQUIRE(merged.range(idx) == winner.range(idx));
    REQUIRE(merged.point(idx) == winner.point(idx));
    REQUIRE(merged.source(idx) == winner.source(idx));
  }
}

}  // namespace

TEST_CASE("project: empty cloud gives an all-empty image") {
  const auto img = project(PointCloud{}, kSpec);
  CHECK(img.occupied_count() == 0);
}

TEST_CASE("project: single mid-FOV point lands in the expected cell") {
  // elevation mid-FOV (0 deg) and azimuth 0 fall in the center row/col
  PointCloud cloud;
  cloud.points.emplace_back(10.0, 0.0, 0.0);
  const auto img = project(cloud, kSpec);
  CHECK(img.occupied_count() == 1);
  // elevation 0 sits on the edge between rows 3 and 4: upper-edge rule
  // assigns the lower bin; azimuth 0 likewise between cols 7 and 8
  CHECK(img.occupied(3, 7));
}

TEST_CASE("project: nearest return wins the cell") {
  const Vec3 dir = kSpec.cell_direction(2, 5);
  PointCloud cloud;
  cloud.points.push_back(kSpec.origin + 5.0 * dir);
  cloud.points.push_back(kSpec.origin + 3.0 * dir);
  const auto img = project(cloud, kSpec);
  CHECK(img.occupied_count() == 1);
  CHECK(img.range(img.index(2, 5)) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("project: out-of-FOV and out-of-range points are dropped") {
  PointCloud cloud;
  cloud.points.emplace_back(0.0, 0.0, 10.0);   // elevation 90
  cloud.points.emplace_back(-1.0, 0.0, -10.0); // below FOV
  cloud.points.emplace_back(100.0, 0.0, 0.0);  // beyond max_range
  cloud.points.emplace_back(0.0, 0.0, 0.0);    // at the origin
  CHECK(project(cloud, kSpec).occupied_count() == 0);
}

TEST_CASE("backproject: empty image and bit-exact round trip") {
  CHECK(backproject(RangeImage(kSpec)).empty());

  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    // points in distinct cells
    PointCloud cloud;
    std::set<std::pair<int, int>> used;
    for (int k = 0; k < 30; ++k) {
      const int i = static_cast<int>(rng.uniform_index(kSpec.rows));
      const int j = static_cast<int>(rng.uniform_index(kSpec.cols));
      if (!used.insert({i, j}).second) continue;
      cloud.points.push_back(point_in_cell(kSpec, i, j, rng.uniform(1.0, 40.0)));
    }
    const auto img = project(cloud, kSpec);
    REQUIRE(img.occupied_count() == cloud.size());
    const auto back = backproject(img);
    std::set<std::array<double, 3>> in_set, out_set;
    for (const auto& p : cloud.points) in_set.insert({p.x(), p.y(), p.z()});
    for (const auto& p : back.points) out_set.insert({p.x(), p.y(), p.z()});
    CHECK(in_set == out_set);
  }
}

TEST_CASE("project then backproject of a dense cloud is a per-cell-nearest subset") {
  Rng rng(31);
  PointCloud cloud;
  for (int k = 0; k < 4000; ++k)
    cloud.points.emplace_back(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-8, 8));
  const auto img = project(cloud, kSpec);
  const auto back = backproject(img);
  CHECK(back.size() == img.occupied_count());
  std::set<std::array<double, 3>> in_set;
  for (const auto& p : cloud.points) in_set.insert({p.x(), p.y(), p.z()});
  for (const auto& p : back.points) CHECK(in_set.count({p.x(), p.y(), p.z()}) == 1);

  // stabilization after one round trip
  const auto img2 = project(back, kSpec);
  REQUIRE(img2.occupied_count() == img.occupied_count());
  for (std::size_t idx = 0; idx < img.size(); ++idx) {
    REQUIRE(img.occupied(idx) == img2.occupied(idx));
    if (img.occupied(idx)) REQUIRE(img.point(idx) == img2.point(idx));
  }
}

TEST_CASE("merge: identity with an empty instance image") {
  Rng rng(41);
  const auto scene = random_image(kSpec, rng, 0.5);
  const auto merged = merge(scene, RangeImage(kSpec));
  for (std::size_t idx = 0; idx < merged.size(); ++idx) {
    CHECK(merged.occupied(idx) == scene.occupied(idx));
    if (scene.occupied(idx)) CHECK(merged.point(idx) == scene.point(idx));
  }
}

TEST_CASE("merge: closer instance point replaces the scene point") {
  RangeImage scene(kSpec), inst(kSpec);
  const auto idx = scene.index(4, 9);
  scene.set_cell(idx, point_in_cell(kSpec, 4, 9, 5.0), 5.0, PointSource::scene);
  inst.set_cell(idx, point_in_cell(kSpec, 4, 9, 3.0), 3.0, PointSource::synthetic);
  const auto merged = merge(scene, inst);
  CHECK(merged.range(idx) == doctest::Approx(3.0));
  CHECK(merged.source(idx) == PointSource::synthetic);
}

TEST_CASE("merge: tie keeps the instance side") {
  RangeImage scene(kSpec), inst(kSpec);
  const auto idx = scene.index(1, 2);
  const Vec3 p = point_in_cell(kSpec, 1, 2, 7.0);
  scene.set_cell(idx, p, 7.0, PointSource::scene);
  inst.set_cell(idx, p, 7.0, PointSource::synthetic);
  CHECK(merge(scene, inst).source(idx) == PointSource::synthetic);
}

TEST_CASE("merge: random 4x8 images match the per-cell oracle") {
  const LidarSpec small{4, 8, -10.0, 10.0, 30.0, Vec3(0, 0, 0)};
  Rng rng(51);
  for (int rep = 0; rep < 200; ++rep) {
    const auto a = random_image(small, rng, rng.uniform(0, 1));
    const auto b = random_image(small, rng, rng.uniform(0, 1));
    check_merge_against_oracle(a, b, merge(a, b));
  }
}

TEST_CASE("merge: idempotent and tie-free commutative") {
  Rng rng(61);
  const auto a = random_image(kSpec, rng, 0.6);
  const auto aa = merge(a, a);
  for (std::size_t idx = 0; idx < a.size(); ++idx) {
    CHECK(aa.occupied(idx) == a.occupied(idx));
    if (a.occupied(idx)) CHECK(aa.point(idx) == a.point(idx));
  }
  // distinct random ranges make ties measure-zero; check both orders agree
  const auto b = random_image(kSpec, rng, 0.6);
  const auto ab = merge(a, b);
  const auto ba = merge(b, a);
  for (std::size_t idx = 0; idx < ab.size(); ++idx) {
    CHECK(ab.occupied(idx) == ba.occupied(idx));
    if (ab.occupied(idx)) CHECK(ab.point(idx) == ba.point(idx));
  }
}

TEST_CASE("merge: spec mismatch is an error") {
  LidarSpec other = kSpec;
  other.max_range = 60.0;
  CHECK_THROWS_WITH_AS(merge(RangeImage(kSpec), RangeImage(other)), "spec-mismatch",
                       std::invalid_argument);
}

TEST_CASE("occlusion_rate: nothing occludes in an empty scene") {
  Rng rng(71);
  const auto inst = random_image(kSpec, rng, 0.4);
  const auto merged = merge(RangeImage(kSpec), inst);
  CHECK(occlusion_rate(inst, merged) == 0.0);
}

TEST_CASE("occlusion_rate: fully occluded and half occluded") {
  RangeImage scene(kSpec), inst(kSpec);
  // 10 instance cells at 10 m; scene closer at 5 m in the first half
  for (int j = 0; j < 10; ++j) {
    const auto idx = inst.index(3, j);
    inst.set_cell(idx, point_in_cell(kSpec, 3, j, 10.0), 10.0, PointSource::synthetic);
    if (j < 5)
      scene.set_cell(idx, point_in_cell(kSpec, 3, j, 5.0), 5.0, PointSource::scene);
  }
  CHECK(occlusion_rate(inst, merge(scene, inst)) == doctest::Approx(0.5));

  RangeImage wall(kSpec);
  for (int j = 0; j < 10; ++j) {
    const auto idx = wall.index(3, j);
    wall.set_cell(idx, point_in_cell(kSpec, 3, j, 2.0), 2.0, PointSource::scene);
  }
  CHECK(occlusion_rate(inst, merge(wall, inst)) == 1.0);
}

TEST_CASE("occlusion_rate: empty instance is an error") {
  CHECK_THROWS_WITH_AS(occlusion_rate(RangeImage(kSpec), RangeImage(kSpec)),
                       "empty-instance", std::invalid_argument);
}

TEST_CASE("range image serialization round trip") {
  Rng rng(81);
  const auto img = random_image(kSpec, rng, 0.5);
  const auto path = std::filesystem::temp_directory_path() / "ri_roundtrip.bin";
  save_range_image(img, path);
  const auto loaded = load_range_image(path);
  REQUIRE(loaded.spec() == img.spec());
  for (std::size_t idx = 0; idx < img.size(); ++idx) {
    REQUIRE(loaded.occupied(idx) == img.occupied(idx));
    if (!img.occupied(idx)) continue;
    // payload carries float32 coordinates
    CHECK(loaded.point(idx).x() == static_cast<float>(img.point(idx).x()));
    CHECK(loaded.point(idx).y() == static_cast<float>(img.point(idx).y()));
    CHECK(loaded.point(idx).z() == static_cast<float>(img.point(idx).z()));
  }
  // header: 8 float64 fields; cells: 1 + 3 * 4 bytes each
  CHECK(std::filesystem::file_size(path) == 64 + img.size() * 13);
  std::filesystem::remove(path);
}
