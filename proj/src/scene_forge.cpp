#include "hunter/scene_forge.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hunter/io.hpp"

namespace hunter {

namespace {
constexpr double kPi = std::numbers::pi;
}

void InsertionConfig::validate() const {
  if (!(max_occlusion > 0 && max_occlusion <= 1))
    throw std::invalid_argument("insertion-config: max_occlusion in (0, 1]");
  if (max_iou < 0 || max_iou > 1)
    throw std::invalid_argument("insertion-config: max_iou in [0, 1]");
  if (max_failures < 1) throw std::invalid_argument("insertion-config: max_failures >= 1");
  if (min_center_distance < 0 || target_lo < 0 || target_hi < target_lo)
    throw std::invalid_argument("insertion-config: invalid bounds");
}

const char* reject_reason_name(RejectReason reason) {
  switch (reason) {
    case RejectReason::none:
      return "none";
    case RejectReason::no_returns:
      return "no-returns";
    case RejectReason::occlusion:
      return "occlusion";
    case RejectReason::iou:
      return "iou";
    case RejectReason::center_distance:
      return "center-distance";
    case RejectReason::prior_occlusion:
      return "prior-occlusion";
  }
  return "unknown";
}

namespace {

// Points of `instance` that won their cells in `merged`.
PointCloud surviving_points(const RangeImage& instance, const RangeImage& merged) {
  PointCloud cloud;
  for (std::size_t idx = 0; idx < instance.size(); ++idx) {
    if (!instance.occupied(idx) || !merged.occupied(idx)) continue;
    if (merged.range(idx) == instance.range(idx) &&
        merged.point(idx) == instance.point(idx)) {
      cloud.points.push_back(instance.point(idx));
      cloud.sources.push_back(PointSource::synthetic);
    }
  }
  return cloud;
}

RigidTransform pose_for(const HumanAsset& asset, double yaw_draw, const Vec3& ground_point) {
  const double delta = yaw_draw - asset.yaw;
  RigidTransform pose = RigidTransform::yaw_about_z(delta);
  PointCloud rotated;
  rotated.points.reserve(asset.vertices.size());
  for (const Vec3& v : asset.vertices) rotated.points.push_back(pose.rotation * v);
  pose.translation = place_on_ground(rotated, ground_point).translation;
  return pose;
}

}  // namespace

InsertOutcome try_insert(FrameState& state, const HumanAsset& asset,
                         std::size_t asset_index, const GroundModel& ground,
                         const InsertionConfig& cfg, const MaskConfig& mask_cfg,
                         Rng& rng) {
  cfg.validate();
  const Vec3 ground_point = sample_insertion_point(ground, rng);
  const double yaw_draw = rng.uniform(-kPi, kPi);
  const RigidTransform pose = pose_for(asset, yaw_draw, ground_point);

  const PointCloud instance_cloud = raycast(asset, pose, state.merged.spec());
  if (instance_cloud.empty()) return {false, RejectReason::no_returns};
  const RangeImage instance_ri = project(instance_cloud, state.merged.spec());

  const RangeImage merged = merge(state.merged, instance_ri);
  if (occlusion_rate(instance_ri, merged) >= cfg.max_occlusion)
    return {false, RejectReason::occlusion};

  const PointCloud survivors = surviving_points(instance_ri, merged);
  const BBox3D box = fit_bbox(survivors, yaw_draw);
  for (const auto& label : state.labels) {
    if (bev_iou(box, label.box) >= cfg.max_iou) return {false, RejectReason::iou};
    if (center_distance(box, label.box) < cfg.min_center_distance)
      return {false, RejectReason::center_distance};
  }
  for (const auto& prior : state.instance_images)
    if (occlusion_rate(prior, merged) >= cfg.max_occlusion)
      return {false, RejectReason::prior_occlusion};

  std::array<AssetJoint, 6> joints = asset.joints;
  for (auto& j : joints) j.position = pose.apply(j.position);

  InstanceLabel label;
  label.instance_id = static_cast<std::int32_t>(state.labels.size());
  label.box = box;
  label.joints = visible_joints(joints, survivors, mask_cfg);
  state.labels.push_back(std::move(label));
  state.instance_images.push_back(instance_ri);
  state.provenance.push_back(InstanceProvenance{asset.id, asset_index, pose});
  state.merged = merged;
  return {true, RejectReason::none};
}

SynthFrame synthesize_frame(const PointCloud& scene, const std::string& frame_id,
                            const std::vector<HumanAsset>& assets,
                            const GroundModel& ground, const LidarSpec& spec,
                            const InsertionConfig& cfg, const MaskConfig& mask_cfg,
                            Rng rng) {
  cfg.validate();
  if (assets.empty()) throw std::invalid_argument("empty asset pool");
  SynthFrame frame;
  frame.scene_frame_id = frame_id;
  frame.seed = rng.seed();
  frame.target_count = static_cast<std::int32_t>(rng.uniform_int(cfg.target_lo, cfg.target_hi));

  FrameState state(project(scene, spec));
  int failures = 0;
  while (static_cast<std::int32_t>(state.labels.size()) < frame.target_count &&
         failures < cfg.max_failures && !ground.empty()) {
    const std::size_t asset_index = rng.uniform_index(assets.size());
    const auto outcome =
        try_insert(state, assets[asset_index], asset_index, ground, cfg, mask_cfg, rng);
    if (!outcome.accepted) ++failures;
  }
  frame.failures = failures;
  frame.cloud = backproject(state.merged);
  frame.labels = std::move(state.labels);
  frame.instances = std::move(state.provenance);
  return frame;
}

std::pair<std::size_t, std::size_t> draw_frame_ref(
    const std::vector<std::size_t>& frames_per_sequence, Rng& rng) {
  if (frames_per_sequence.empty()) throw std::invalid_argument("empty manifest");
  const std::size_t seq = rng.uniform_index(frames_per_sequence.size());
  if (frames_per_sequence[seq] == 0) throw std::invalid_argument("empty sequence");
  return {seq, rng.uniform_index(frames_per_sequence[seq])};
}

ValidationResult validate_synth_frame(const SynthFrame& frame, const PointCloud& scene,
                                      const std::vector<HumanAsset>& assets,
                                      const LidarSpec& spec, const InsertionConfig& cfg,
                                      bool float32_cloud) {
  const auto fail = [](std::string msg) { return ValidationResult{false, std::move(msg)}; };
  if (frame.failures > cfg.max_failures) return fail("failure budget exceeded");
  if (static_cast<std::int32_t>(frame.labels.size()) > frame.target_count)
    return fail("more labels than the wanted count");
  if (frame.labels.size() != frame.instances.size())
    return fail("label/provenance count mismatch");

  RangeImage merged = project(scene, spec);
  std::vector<RangeImage> instance_images;
  for (const auto& prov : frame.instances) {
    if (prov.asset_index >= assets.size()) return fail("asset index out of range");
    const PointCloud cloud = raycast(assets[prov.asset_index], prov.pose, spec);
    if (cloud.empty()) return fail("replayed raycast produced no points");
    instance_images.push_back(project(cloud, spec));
    merged = merge(merged, instance_images.back());
  }
  for (std::size_t k = 0; k < instance_images.size(); ++k)
    if (occlusion_rate(instance_images[k], merged) >= cfg.max_occlusion)
      return fail("occlusion rate at or above limit for instance " + std::to_string(k));
  for (std::size_t i = 0; i < frame.labels.size(); ++i) {
    for (std::size_t j = i + 1; j < frame.labels.size(); ++j) {
      if (bev_iou(frame.labels[i].box, frame.labels[j].box) >= cfg.max_iou)
        return fail("pairwise BEV IoU at or above limit");
      if (center_distance(frame.labels[i].box, frame.labels[j].box) < cfg.min_center_distance)
        return fail("label centers too close");
    }
  }
  // every label must contain at least one synthetic point of the frame cloud
  const double tol = float32_cloud ? 1e-4 : 1e-9;
  for (const auto& label : frame.labels) {
    const auto contains = [&](const Vec3& p) {
      const double c = std::cos(label.box.yaw), s = std::sin(label.box.yaw);
      const Vec3 d = p - label.box.center;
      const double u = c * d.x() + s * d.y();
      const double v = -s * d.x() + c * d.y();
      return std::abs(u) <= label.box.dims.x() * 0.5 + tol &&
             std::abs(v) <= label.box.dims.y() * 0.5 + tol &&
             std::abs(d.z()) <= label.box.dims.z() * 0.5 + tol;
    };
    bool any = false;
    for (std::size_t k = 0; k < frame.cloud.size() && !any; ++k)
      any = frame.cloud.source_of(k) == PointSource::synthetic && contains(frame.cloud.points[k]);
    if (!any) return fail("label without synthetic support");
  }
  // the stored cloud must be exactly the replayed merge (at payload precision)
  const PointCloud replayed = backproject(merged);
  if (replayed.points.size() != frame.cloud.points.size())
    return fail("cloud size differs from replayed merge");
  const auto as_stored = [&](const Vec3& p) {
    return float32_cloud ? Vec3(static_cast<float>(p.x()), static_cast<float>(p.y()),
                                static_cast<float>(p.z()))
                         : p;
  };
  for (std::size_t k = 0; k < replayed.points.size(); ++k)
    if (as_stored(replayed.points[k]) != frame.cloud.points[k] ||
        replayed.sources[k] != frame.cloud.source_of(k))
      return fail("cloud contents differ from replayed merge");
  return {};
}

void save_synth_frame(const SynthFrame& frame, const std::filesystem::path& cloud_path,
                      const std::filesystem::path& labels_path) {
  write_point_cloud_bin(frame.cloud, cloud_path);
  nlohmann::ordered_json doc;
  doc["seed"] = frame.seed;
  doc["scene_frame"] = frame.scene_frame_id;
  doc["target"] = frame.target_count;
  doc["failures"] = frame.failures;
  doc["ids"] = nlohmann::json::array();
  doc["boxes"] = nlohmann::json::array();
  doc["joints"] = nlohmann::json::array();
  doc["asset_ids"] = nlohmann::json::array();
  doc["poses"] = nlohmann::json::array();
  for (const auto& label : frame.labels) {
    doc["ids"].push_back(label.instance_id);
    doc["boxes"].push_back({label.box.center.x(), label.box.center.y(),
                            label.box.center.z(), label.box.dims.x(), label.box.dims.y(),
                            label.box.dims.z(), label.box.yaw});
    nlohmann::ordered_json joints;
    for (const auto& j : label.joints) {
      joints[body_part_name(j.part)] = {
          {"position", {j.position.x(), j.position.y(), j.position.z()}},
          {"visible", j.visible},
          {"points", j.support_points}};
    }
    doc["joints"].push_back(std::move(joints));
  }
  for (const auto& prov : frame.instances) {
    doc["asset_ids"].push_back(prov.asset_id);
    nlohmann::ordered_json pose;
    pose["asset_index"] = prov.asset_index;
    pose["rotation"] = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) pose["rotation"].push_back(prov.pose.rotation(r, c));
    pose["translation"] = {prov.pose.translation.x(), prov.pose.translation.y(),
                           prov.pose.translation.z()};
    doc["poses"].push_back(std::move(pose));
  }
  std::ofstream out(labels_path);
  if (!out) throw std::runtime_error("cannot open " + labels_path.string());
  out << doc.dump(2) << "\n";
}

SynthFrame load_synth_frame(const std::filesystem::path& cloud_path,
                            const std::filesystem::path& labels_path) {
  SynthFrame frame;
  frame.cloud = read_point_cloud_bin(cloud_path, /*extra_is_source=*/true);
  std::ifstream in(labels_path);
  if (!in) throw std::runtime_error("cannot open " + labels_path.string());
  const auto doc = nlohmann::json::parse(in);
  frame.seed = doc.at("seed").get<std::uint64_t>();
  frame.scene_frame_id = doc.at("scene_frame").get<std::string>();
  frame.target_count = doc.at("target").get<std::int32_t>();
  frame.failures = doc.at("failures").get<std::int32_t>();
  const auto& ids = doc.at("ids");
  const auto& boxes = doc.at("boxes");
  const auto& joints = doc.at("joints");
  for (std::size_t k = 0; k < ids.size(); ++k) {
    InstanceLabel label;
    label.instance_id = ids.at(k).get<std::int32_t>();
    const auto& row = boxes.at(k);
    label.box.center = Vec3(row.at(0), row.at(1), row.at(2));
    label.box.dims = Vec3(row.at(3), row.at(4), row.at(5));
    label.box.yaw = row.at(6);
    for (const auto& [name, j] : joints.at(k).items()) {
      VisibleJoint vj;
      vj.part = body_part_from_name(name);
      vj.position = Vec3(j.at("position").at(0), j.at("position").at(1),
                         j.at("position").at(2));
      vj.visible = j.at("visible").get<bool>();
      vj.support_points = j.at("points").get<int>();
      label.joints.push_back(vj);
    }
    frame.labels.push_back(std::move(label));
  }
  const auto& asset_ids = doc.at("asset_ids");
  const auto& poses = doc.at("poses");
  for (std::size_t k = 0; k < asset_ids.size(); ++k) {
    InstanceProvenance prov;
    prov.asset_id = asset_ids.at(k).get<std::string>();
    const auto& pose = poses.at(k);
    prov.asset_index = pose.at("asset_index").get<std::size_t>();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        prov.pose.rotation(r, c) = pose.at("rotation").at(static_cast<std::size_t>(r * 3 + c));
    prov.pose.translation = Vec3(pose.at("translation").at(0), pose.at("translation").at(1),
                                 pose.at("translation").at(2));
    frame.instances.push_back(std::move(prov));
  }
  return frame;
}

}  // namespace hunter
