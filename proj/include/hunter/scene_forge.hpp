#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hunter/geometry.hpp"
#include "hunter/ground_seg.hpp"
#include "hunter/lidar_sim.hpp"
#include "hunter/range_image.hpp"
#include "hunter/rng.hpp"
#include "hunter/supervision.hpp"

namespace hunter {

struct InsertionConfig {
  double max_occlusion = 0.70;       // accept strictly below
  double max_iou = 0.35;             // accept strictly below
  int max_failures = 10;             // cumulative per frame
  double min_center_distance = 0.5;  // meters between label centers
  int target_lo = 1;                 // wanted humans per frame
  int target_hi = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class RejectReason {
  none,
  no_returns,       // raycast produced no points
  occlusion,        // new instance occluded beyond the limit
  iou,              // BEV overlap with an existing label
  center_distance,  // label centers too close
  prior_occlusion   // a previous instance would drop below visibility
};
const char* reject_reason_name(RejectReason reason);

struct InstanceLabel {
  std::int32_t instance_id = 0;
  BBox3D box;
  JointSet joints;
};

struct InstanceProvenance {
  std::string asset_id;
  std::size_t asset_index = 0;  // into the asset pool
  RigidTransform pose;
};

// Evolving per-frame insertion state.
struct FrameState {
  RangeImage merged;
  std::vector<RangeImage> instance_images;
  std::vector<InstanceLabel> labels;
  std::vector<InstanceProvenance> provenance;

  explicit FrameState(RangeImage scene) : merged(std::move(scene)) {}
};

struct InsertOutcome {
  bool accepted = false;
  RejectReason reason = RejectReason::none;
};

struct SynthFrame {
  PointCloud cloud;  // merged scene + surviving synthetic points, tagged
  std::vector<InstanceLabel> labels;
  std::string scene_frame_id;
  std::vector<InstanceProvenance> instances;
  std::uint64_t seed = 0;
  std::int32_t target_count = 0;
  std::int32_t failures = 0;
};

// One insertion attempt: sample a ground point, place with uniform random
// yaw, raycast, merge, and apply the three validity judgments plus the
// center-distance collision rule. Mutates `state` only on acceptance.
InsertOutcome try_insert(FrameState& state, const HumanAsset& asset,
                         std::size_t asset_index, const GroundModel& ground,
                         const InsertionConfig& cfg, const MaskConfig& mask_cfg,
                         Rng& rng);

// Repeat try_insert until the per-frame target is reached or the failure
// budget is spent. Zero-insertion frames are valid output.
SynthFrame synthesize_frame(const PointCloud& scene, const std::string& frame_id,
                            const std::vector<HumanAsset>& assets,
                            const GroundModel& ground, const LidarSpec& spec,
                            const InsertionConfig& cfg, const MaskConfig& mask_cfg,
                            Rng rng);

// Uniform sequence choice, then uniform frame choice within it.
std::pair<std::size_t, std::size_t> draw_frame_ref(
    const std::vector<std::size_t>& frames_per_sequence, Rng& rng);

// Re-runs the insertion judgments from stored provenance; `detail` names
// the first violated judgment. With float32_cloud the stored cloud is
// compared at float precision (the on-disk payload format).
struct ValidationResult {
  bool ok = true;
  std::string detail;
};
ValidationResult validate_synth_frame(const SynthFrame& frame, const PointCloud& scene,
                                      const std::vector<HumanAsset>& assets,
                                      const LidarSpec& spec, const InsertionConfig& cfg,
                                      bool float32_cloud = false);

// Cloud as packed float32 (x, y, z, source) plus a labels/provenance JSON.
void save_synth_frame(const SynthFrame& frame, const std::filesystem::path& cloud_path,
                      const std::filesystem::path& labels_path);
SynthFrame load_synth_frame(const std::filesystem::path& cloud_path,
                            const std::filesystem::path& labels_path);

}  // namespace hunter
