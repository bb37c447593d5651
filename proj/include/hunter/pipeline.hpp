#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hunter/eval_metrics.hpp"
#include "hunter/geometry.hpp"
#include "hunter/ground_seg.hpp"
#include "hunter/lidar_sim.hpp"
#include "hunter/loss_kernels.hpp"
#include "hunter/range_image.hpp"
#include "hunter/scene_forge.hpp"
#include "hunter/supervision.hpp"
#include "hunter/track_filter.hpp"

namespace hunter {

// Full effective configuration of a pipeline run. Presets exist for the
// supported datasets; a JSON config file overrides individual fields.
struct PipelineConfig {
  std::string dataset = "toy";
  std::filesystem::path manifest_path;
  std::filesystem::path asset_dir;
  std::optional<std::filesystem::path> ground_dir;  // precomputed ground files
  std::uint64_t seed = 0;
  DetectionRange range{-25.6, 25.6, -25.6, 25.6, -2.5, 7.5};
  Vec3 voxel_size{0.1, 0.1, 0.25};  // backbone voxelization, echoed in outputs
  double bev_cell = 0.2;
  LidarSpec lidar;
  RansacConfig ransac;
  InsertionConfig insertion;
  MaskConfig mask;
  LossConfig loss;
  FilterConfig filter;
  EvalConfig eval;

  BevGrid bev_grid() const {
    return BevGrid{range.x_min, range.x_max, range.y_min, range.y_max, bev_cell};
  }
  static PipelineConfig defaults_for(const std::string& dataset);
};

// Load a JSON config; the "dataset" field picks the preset, every other
// field is an override. Paths resolve relative to the config file.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
// Full effective-config echo (JSON text), embedded in all run metadata.
std::string config_echo_json(const PipelineConfig& cfg);

struct FrameRecord {
  std::string id;
  std::filesystem::path cloud;
  std::filesystem::path gt;  // empty when absent
};

struct SequenceRecord {
  std::string id;
  std::vector<FrameRecord> frames;
};

struct Manifest {
  std::string dataset;
  std::vector<SequenceRecord> sequences;

  std::size_t frame_count() const;
  void validate() const;  // unique frame ids
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Asset pool: every "<stem>.obj" with a "<stem>.joints.json" sidecar,
// ordered by filename.
std::vector<HumanAsset> load_asset_pool(const std::filesystem::path& dir);

struct CommandResult {
  int exit_code = 0;  // 0 ok, 1 fatal, 2 partial with warnings
  int warnings = 0;
  std::string message;
};

// Worker count from HUNTER_FORGE_WORKERS (>= 1), else hardware concurrency.
int worker_count();

CommandResult cmd_segment_ground(const PipelineConfig& cfg,
                                 const std::filesystem::path& out_dir);
// Forges n_frames synthetic frames (cloud + labels + M / M* / heatmap) under
// out_dir/corpus-<confighash>/; deterministic for a fixed config and seed.
CommandResult cmd_forge(const PipelineConfig& cfg, std::size_t n_frames,
                        const std::filesystem::path& out_dir);
CommandResult cmd_filter(const PipelineConfig& cfg, const std::filesystem::path& dets_in,
                         const std::filesystem::path& dets_out);
CommandResult cmd_update_mask(const PipelineConfig& cfg,
                              const std::filesystem::path& mask_dir,
                              const std::filesystem::path& labels_path,
                              const std::filesystem::path& out_dir);
CommandResult cmd_eval(const PipelineConfig& cfg, const std::filesystem::path& dets_path,
                       const std::filesystem::path& gt_path,
                       const std::filesystem::path& report_path, std::string* table = nullptr);
CommandResult cmd_losscheck(const PipelineConfig& cfg, const std::filesystem::path& in_path,
                            const std::filesystem::path& out_path);

// Procedurally generated offline dataset: flat noisy ground, pillars and
// walls, plus walking humanoids with ground-truth boxes.
struct ToyDatasetSpec {
  int sequences = 3;
  int frames_per_sequence = 30;
  std::uint64_t seed = 20260801;
  int assets = 5;
  std::size_t ground_points = 18000;
};
// Returns the manifest path.
std::filesystem::path make_toy_dataset(const std::filesystem::path& dir,
                                       const ToyDatasetSpec& spec);

}  // namespace hunter
