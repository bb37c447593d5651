#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hunter/geometry.hpp"
#include "hunter/track_filter.hpp"

namespace hunter {

struct EvalConfig {
  std::vector<double> distance_thresholds{0.25, 0.5, 1.0};  // ascending
  double nms_radius = 0.2;
  bool apply_nms = true;
  double score_threshold = 0.5;  // thresholded precision/recall variant
  DetectionRange range{-25.6, 25.6, -25.6, 25.6, -2.5, 7.5};
  bool crop_to_range = true;

  void validate() const;
};

struct ThresholdMetrics {
  double threshold = 0.0;
  double ap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double precision_thresholded = 0.0;
  double recall_thresholded = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t n_gt = 0;
};

struct MetricsReport {
  std::vector<ThresholdMetrics> per_threshold;
  double map = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  bool empty_benchmark = false;  // no ground truth and no detections
  std::string pr_integration = "101-point interpolation";
  double score_threshold = 0.0;
};

// Keep detections whose BEV center is at least `radius` from every
// higher-scoring kept center; output ordered by (confidence desc, input
// index asc).
std::vector<Detection> circle_nms(const std::vector<Detection>& dets, double radius);

// Greedy per-frame matching in confidence order: nearest unmatched ground
// truth within D is a TP; flags align with `dets`, which must already be
// sorted by descending confidence.
std::vector<bool> match_frame(const std::vector<Detection>& dets,
                              const std::vector<BBox3D>& gts, double d_threshold);

struct PooledDetection {
  double confidence;
  bool tp;
};

// 101-point interpolated AP over the pooled detections.
double average_precision(std::vector<PooledDetection> pool, std::int64_t n_gt,
                         bool* empty_flag = nullptr);

// Full evaluation; frames align by id.
// Throws std::invalid_argument("frame-mismatch") on id mismatch.
MetricsReport evaluate(const std::vector<FrameDetections>& dets,
                       const std::vector<FrameDetections>& gts, const EvalConfig& cfg);

std::string report_table(const MetricsReport& report);
void save_report(const MetricsReport& report, const EvalConfig& cfg,
                 const std::filesystem::path& path);

}  // namespace hunter
