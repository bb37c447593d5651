#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "hunter/geometry.hpp"
#include "hunter/range_image.hpp"

namespace hunter {

enum class BodyPart : std::uint8_t {
  head = 0,
  trunk = 1,
  left_arm = 2,
  right_arm = 3,
  left_leg = 4,
  right_leg = 5
};

const char* body_part_name(BodyPart part);
BodyPart body_part_from_name(const std::string& name);

struct AssetJoint {
  BodyPart part;
  Vec3 position;
};

// Posed triangle mesh with six annotated key joints and a facing yaw.
struct HumanAsset {
  std::string id;
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> triangles;
  std::array<AssetJoint, 6> joints;  // one entry per BodyPart
  double yaw = 0.0;

  void validate() const;  // throws std::invalid_argument
};

struct RayHit {
  std::int32_t row;
  std::int32_t col;
  Vec3 point;
  double range;
};

// Additive Gaussian range noise, off by default (sigma = 0 keeps hits
// exactly on the mesh surface).
struct RaycastNoise {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

// Cast one ray per cell (bin-center direction) against the posed mesh and
// keep the nearest intersection per cell. A mesh behind the sensor or
// outside the FOV simply produces no hits.
std::vector<RayHit> raycast_hits(const HumanAsset& asset, const RigidTransform& pose,
                                 const LidarSpec& spec, const RaycastNoise& noise = {});

// Same, as a synthetic-tagged point cloud.
PointCloud raycast(const HumanAsset& asset, const RigidTransform& pose,
                   const LidarSpec& spec, const RaycastNoise& noise = {});

// OBJ subset (v/f records) plus sidecar JSON {"yaw": r, "joints": {part: [x,y,z]}}.
HumanAsset load_human_asset(const std::filesystem::path& obj_path,
                            const std::filesystem::path& joints_path);
void save_human_asset(const HumanAsset& asset, const std::filesystem::path& obj_path,
                      const std::filesystem::path& joints_path);

// Procedural ellipsoid-limb humanoid used as a license-free test and
// toy-corpus asset. Lowest point near z = 0, facing +x before `yaw`.
struct HumanoidParams {
  double height = 1.7;      // meters, sensible range 1.5 - 1.9
  double arm_angle = 0.25;  // forward swing, radians
  double leg_angle = 0.15;  // stride half-angle, radians
  double yaw = 0.0;
  int rings = 8;
  int slices = 12;
};
HumanAsset make_humanoid(const HumanoidParams& params);

}  // namespace hunter
