#include "hunter/lidar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hunter/rng.hpp"
#include "hunter/simd/kernels.hpp"

namespace hunter {

namespace {
constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kParallelEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

const char* kPartNames[6] = {"head",      "trunk",    "left_arm",
                             "right_arm", "left_leg", "right_leg"};
}  // namespace

const char* body_part_name(BodyPart part) {
  return kPartNames[static_cast<int>(part)];
}

BodyPart body_part_from_name(const std::string& name) {
  for (int k = 0; k < 6; ++k)
    if (name == kPartNames[k]) return static_cast<BodyPart>(k);
  throw std::invalid_argument("unknown body part: " + name);
}

void HumanAsset::validate() const {
  if (triangles.empty()) throw std::invalid_argument("asset: mesh has no triangles");
  const auto n = static_cast<std::int32_t>(vertices.size());
  for (const auto& t : triangles)
    for (const auto idx : t)
      if (idx < 0 || idx >= n) throw std::invalid_argument("asset: triangle index out of range");
  bool seen[6] = {};
  for (const auto& j : joints) {
    const int k = static_cast<int>(j.part);
    if (k < 0 || k > 5 || seen[k]) throw std::invalid_argument("asset: joints must cover each part once");
    seen[k] = true;
  }
}

namespace {

struct AngularWindow {
  std::int32_t row_lo, row_hi;   // inclusive, clamped
  std::int64_t col_lo, col_hi;   // inclusive, unwrapped (col_hi - col_lo < W)
  bool full_cols = false;
  bool empty = false;
};

// Conservative cell window for one triangle: vertex angular extents padded
// by two bins. Triangles subtending more than a half turn in azimuth (or a
// vertex at the origin) fall back to the full column range.
AngularWindow triangle_window(const Vec3& a, const Vec3& b, const Vec3& c,
                              const LidarSpec& spec) {
  AngularWindow w{};
  const Vec3 rel[3] = {a - spec.origin, b - spec.origin, c - spec.origin};
  double elev[3], azim[3];
  for (int k = 0; k < 3; ++k) {
    const double rxy = std::hypot(rel[k].x(), rel[k].y());
    const double r = rel[k].norm();
    if (r < 1e-9 || rxy < 1e-12) {
      w.row_lo = 0;
      w.row_hi = spec.rows - 1;
      w.full_cols = true;
      return w;
    }
    elev[k] = std::atan2(rel[k].z(), rxy) * kDegPerRad;
    azim[k] = std::atan2(rel[k].y(), rel[k].x()) * kDegPerRad;
  }

  const double e_lo = std::min({elev[0], elev[1], elev[2]});
  const double e_hi = std::max({elev[0], elev[1], elev[2]});
  if (e_hi < spec.min_elev_deg - 2 * spec.elev_bin_deg() ||
      e_lo > spec.max_elev_deg + 2 * spec.elev_bin_deg()) {
    w.empty = true;
    return w;
  }
  w.row_lo = static_cast<std::int32_t>(
      std::clamp<std::int64_t>(grid_bin(e_lo, spec.min_elev_deg, spec.elev_bin_deg()) - 2,
                               0, spec.rows - 1));
  w.row_hi = static_cast<std::int32_t>(
      std::clamp<std::int64_t>(grid_bin(e_hi, spec.min_elev_deg, spec.elev_bin_deg()) + 2,
                               0, spec.rows - 1));

  // minimal circular arc containing the three azimuths
  double best_start = azim[0], best_extent = 361.0;
  for (int k = 0; k < 3; ++k) {
    double extent = 0.0;
    for (int m = 0; m < 3; ++m) {
      double d = azim[m] - azim[k];
      d -= 360.0 * std::floor(d / 360.0);  // [0, 360)
      extent = std::max(extent, d);
    }
    if (extent < best_extent) {
      best_extent = extent;
      best_start = azim[k];
    }
  }
  if (best_extent > 180.0) {
    w.full_cols = true;
    return w;
  }
  w.col_lo = grid_bin(best_start, -180.0, spec.azim_bin_deg()) - 2;
  w.col_hi = grid_bin(best_start + best_extent, -180.0, spec.azim_bin_deg()) + 2;
  if (w.col_hi - w.col_lo + 1 >= spec.cols) w.full_cols = true;
  return w;
}

}  // namespace

std::vector<RayHit> raycast_hits(const HumanAsset& asset, const RigidTransform& pose,
                                 const LidarSpec& spec, const RaycastNoise& noise) {
  asset.validate();
  spec.validate();
  const std::int32_t H = spec.rows, W = spec.cols;

  std::vector<Vec3> verts(asset.vertices.size());
  for (std::size_t k = 0; k < verts.size(); ++k) verts[k] = pose.apply(asset.vertices[k]);

  // bin-center direction tables
  std::vector<double> ca(W), sa(W), ce(H), se(H);
  for (std::int32_t j = 0; j < W; ++j) {
    const double az = (-180.0 + (j + 0.5) * spec.azim_bin_deg()) / kDegPerRad;
    ca[j] = std::cos(az);
    sa[j] = std::sin(az);
  }
  for (std::int32_t i = 0; i < H; ++i) {
    const double el = (spec.min_elev_deg + (i + 0.5) * spec.elev_bin_deg()) / kDegPerRad;
    ce[i] = std::cos(el);
    se[i] = std::sin(el);
  }

  std::vector<double> t_best(static_cast<std::size_t>(H) * W, kInf);
  std::vector<double> dx(W), dy(W), dz(W), ts(W);
  const auto& kernels = simd::active();

  for (const auto& tri_idx : asset.triangles) {
    const Vec3& v0 = verts[tri_idx[0]];
    const Vec3& v1 = verts[tri_idx[1]];
    const Vec3& v2 = verts[tri_idx[2]];
    const AngularWindow win = triangle_window(v0, v1, v2, spec);
    if (win.empty) continue;

    simd::TrianglePre pre{};
    for (int k = 0; k < 3; ++k) {
      pre.e1[k] = v1[k] - v0[k];
      pre.e2[k] = v2[k] - v0[k];
      pre.s[k] = spec.origin[k] - v0[k];
    }
    pre.q[0] = pre.s[1] * pre.e1[2] - pre.s[2] * pre.e1[1];
    pre.q[1] = pre.s[2] * pre.e1[0] - pre.s[0] * pre.e1[2];
    pre.q[2] = pre.s[0] * pre.e1[1] - pre.s[1] * pre.e1[0];
    pre.t_num = pre.e2[0] * pre.q[0] + pre.e2[1] * pre.q[1] + pre.e2[2] * pre.q[2];

    const std::int64_t c_lo = win.full_cols ? 0 : win.col_lo;
    const std::int64_t c_hi = win.full_cols ? W - 1 : win.col_hi;
    for (std::int32_t i = win.row_lo; i <= win.row_hi; ++i) {
      // gather the strip of bin-center directions (columns may wrap)
      const std::size_t n = static_cast<std::size_t>(c_hi - c_lo + 1);
      for (std::size_t k = 0; k < n; ++k) {
        const std::int32_t j = static_cast<std::int32_t>(((c_lo + static_cast<std::int64_t>(k)) % W + W) % W);
        dx[k] = ce[i] * ca[j];
        dy[k] = ce[i] * sa[j];
        dz[k] = se[i];
      }
      kernels.ray_triangle(n, dx.data(), dy.data(), dz.data(), pre, kParallelEps, ts.data());
      for (std::size_t k = 0; k < n; ++k) {
        if (ts[k] == kInf) continue;
        const std::int32_t j = static_cast<std::int32_t>(((c_lo + static_cast<std::int64_t>(k)) % W + W) % W);
        double& best = t_best[static_cast<std::size_t>(i) * W + j];
        if (ts[k] < best) best = ts[k];
      }
    }
  }

  std::vector<RayHit> hits;
  Rng noise_rng(noise.seed);
  for (std::int32_t i = 0; i < H; ++i) {
    for (std::int32_t j = 0; j < W; ++j) {
      double t = t_best[static_cast<std::size_t>(i) * W + j];
      if (t == kInf) continue;
      if (noise.sigma > 0.0) t += noise.sigma * gaussian(noise_rng);
      if (t <= 0.0 || t > spec.max_range) continue;
      const Vec3 dir(ce[i] * ca[j], ce[i] * sa[j], se[i]);
      hits.push_back(RayHit{i, j, spec.origin + t * dir, t});
    }
  }
  return hits;
}

PointCloud raycast(const HumanAsset& asset, const RigidTransform& pose,
                   const LidarSpec& spec, const RaycastNoise& noise) {
  const auto hits = raycast_hits(asset, pose, spec, noise);
  PointCloud cloud;
  cloud.points.reserve(hits.size());
  cloud.sources.assign(hits.size(), PointSource::synthetic);
  for (const auto& h : hits) cloud.points.push_back(h.point);
  return cloud;
}

HumanAsset load_human_asset(const std::filesystem::path& obj_path,
                            const std::filesystem::path& joints_path) {
  std::ifstream in(obj_path);
  if (!in) throw std::runtime_error("cannot open " + obj_path.string());
  HumanAsset asset;
  asset.id = obj_path.stem().string();
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 p;
      ls >> p.x() >> p.y() >> p.z();
      asset.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<std::int32_t> face;
      std::string fld;
      while (ls >> fld) {
        // "idx", "idx/..." forms; indices are 1-based
        face.push_back(static_cast<std::int32_t>(std::stol(fld)) - 1);
      }
      for (std::size_t k = 2; k < face.size(); ++k)
        asset.triangles.push_back({face[0], face[k - 1], face[k]});
    }
  }

  std::ifstream jin(joints_path);
  if (!jin) throw std::runtime_error("cannot open " + joints_path.string());
  const auto doc = nlohmann::json::parse(jin);
  asset.yaw = doc.at("yaw").get<double>();
  const auto& joints = doc.at("joints");
  for (int k = 0; k < 6; ++k) {
    const auto& pos = joints.at(kPartNames[k]);
    asset.joints[k] = AssetJoint{static_cast<BodyPart>(k),
                                 Vec3(pos.at(0).get<double>(), pos.at(1).get<double>(),
                                      pos.at(2).get<double>())};
  }
  asset.validate();
  return asset;
}

void save_human_asset(const HumanAsset& asset, const std::filesystem::path& obj_path,
                      const std::filesystem::path& joints_path) {
  std::ofstream out(obj_path);
  if (!out) throw std::runtime_error("cannot open " + obj_path.string());
  out.precision(17);
  for (const auto& v : asset.vertices)
    out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : asset.triangles)
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";

  nlohmann::ordered_json doc;
  doc["yaw"] = asset.yaw;
  for (const auto& j : asset.joints)
    doc["joints"][body_part_name(j.part)] = {j.position.x(), j.position.y(),
                                             j.position.z()};
  std::ofstream jout(joints_path);
  if (!jout) throw std::runtime_error("cannot open " + joints_path.string());
  jout << doc.dump(2) << "\n";
}

namespace {

// Unit UV sphere; callers scale/rotate/translate the vertices.
void append_sphere(std::vector<Vec3>& verts,
                   std::vector<std::array<std::int32_t, 3>>& tris,
                   const Eigen::Matrix3d& shape, const Vec3& center, int rings,
                   int slices) {
  const auto base = static_cast<std::int32_t>(verts.size());
  verts.push_back(shape * Vec3(0, 0, 1) + center);  // north pole
  for (int r = 1; r < rings; ++r) {
    const double theta = std::numbers::pi * r / rings;
    for (int s = 0; s < slices; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / slices;
      verts.push_back(shape * Vec3(std::sin(theta) * std::cos(phi),
                                   std::sin(theta) * std::sin(phi), std::cos(theta)) +
                      center);
    }
  }
  verts.push_back(shape * Vec3(0, 0, -1) + center);  // south pole
  const std::int32_t south = static_cast<std::int32_t>(verts.size()) - 1;
  const auto ring_at = [&](int r, int s) {
    return base + 1 + (r - 1) * slices + (s % slices);
  };
  for (int s = 0; s < slices; ++s)
    tris.push_back({base, ring_at(1, s + 1), ring_at(1, s)});
  for (int r = 1; r < rings - 1; ++r) {
    for (int s = 0; s < slices; ++s) {
      tris.push_back({ring_at(r, s), ring_at(r, s + 1), ring_at(r + 1, s)});
      tris.push_back({ring_at(r, s + 1), ring_at(r + 1, s + 1), ring_at(r + 1, s)});
    }
  }
  for (int s = 0; s < slices; ++s)
    tris.push_back({south, ring_at(rings - 1, s), ring_at(rings - 1, s + 1)});
}

Eigen::Matrix3d limb_shape(const Vec3& axis_dir, double half_len, double radius) {
  const Vec3 z = axis_dir.normalized();
  Vec3 ref = std::abs(z.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 x = ref.cross(z).normalized();
  const Vec3 y = z.cross(x);
  Eigen::Matrix3d m;
  m.col(0) = x * radius;
  m.col(1) = y * radius;
  m.col(2) = z * half_len;
  return m;
}

}  // namespace

HumanAsset make_humanoid(const HumanoidParams& params) {
  const double h = params.height;
  HumanAsset asset;
  asset.id = "humanoid";
  asset.yaw = params.yaw;

  const Vec3 head_c(0, 0, 0.93 * h);
  const Vec3 trunk_c(0, 0, 0.68 * h);
  const double hip_z = 0.52 * h, ankle_z = 0.04 * h;
  const double shoulder_z = 0.82 * h, hand_z = 0.50 * h;

  auto swing = [](double z_top, double z_bot, double lateral_y, double angle) {
    // limb axis tilted forward (+x) by `angle` about the top attachment
    const double len = z_top - z_bot;
    const Vec3 top(0, lateral_y, z_top);
    const Vec3 bot(len * std::sin(angle), lateral_y, z_top - len * std::cos(angle));
    return std::pair<Vec3, Vec3>(top, bot);
  };

  const auto [lsh, lha] = swing(shoulder_z, hand_z, 0.16 * h, params.arm_angle);
  const auto [rsh, rha] = swing(shoulder_z, hand_z, -0.16 * h, -params.arm_angle);
  const auto [lhp, lan] = swing(hip_z, ankle_z, 0.09 * h, params.leg_angle);
  const auto [rhp, ran] = swing(hip_z, ankle_z, -0.09 * h, -params.leg_angle);

  struct Part {
    BodyPart part;
    Eigen::Matrix3d shape;
    Vec3 center;
  };
  const Part parts[6] = {
      {BodyPart::head, Eigen::Vector3d(0.07 * h, 0.07 * h, 0.07 * h).asDiagonal(), head_c},
      {BodyPart::trunk, Eigen::Vector3d(0.10 * h, 0.14 * h, 0.18 * h).asDiagonal(), trunk_c},
      {BodyPart::left_arm, limb_shape(lsh - lha, (lsh - lha).norm() * 0.5, 0.035 * h),
       (lsh + lha) * 0.5},
      {BodyPart::right_arm, limb_shape(rsh - rha, (rsh - rha).norm() * 0.5, 0.035 * h),
       (rsh + rha) * 0.5},
      {BodyPart::left_leg, limb_shape(lhp - lan, (lhp - lan).norm() * 0.5, 0.06 * h),
       (lhp + lan) * 0.5},
      {BodyPart::right_leg, limb_shape(rhp - ran, (rhp - ran).norm() * 0.5, 0.06 * h),
       (rhp + ran) * 0.5},
  };

  const Eigen::Matrix3d rot =
      Eigen::AngleAxisd(params.yaw, Vec3::UnitZ()).toRotationMatrix();
  for (const auto& part : parts) {
    const auto first = asset.vertices.size();
    append_sphere(asset.vertices, asset.triangles, part.shape, part.center,
                  params.rings, params.slices);
    for (std::size_t k = first; k < asset.vertices.size(); ++k)
      asset.vertices[k] = rot * asset.vertices[k];
    asset.joints[static_cast<int>(part.part)] =
        AssetJoint{part.part, rot * part.center};
  }
  asset.validate();
  return asset;
}

}  // namespace hunter
