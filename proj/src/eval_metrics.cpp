#include "hunter/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hunter/simd/kernels.hpp"

namespace hunter {

void EvalConfig::validate() const {
  if (distance_thresholds.empty()) throw std::invalid_argument("eval-config: no thresholds");
  double prev = 0.0;
  for (const double t : distance_thresholds) {
    if (!(t > prev)) throw std::invalid_argument("eval-config: thresholds must be positive ascending");
    prev = t;
  }
  if (nms_radius < 0) throw std::invalid_argument("eval-config: nms radius must be >= 0");
}

std::vector<Detection> circle_nms(const std::vector<Detection>& dets, double radius) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].confidence != dets[b].confidence)
      return dets[a].confidence > dets[b].confidence;
    return a < b;
  });
  const double r2 = radius * radius;
  std::vector<Detection> kept;
  std::vector<double> kx, ky;
  const auto& kernels = simd::active();
  for (const auto idx : order) {
    const double cx = dets[idx].box.center.x();
    const double cy = dets[idx].box.center.y();
    if (!kx.empty() && kernels.any_within_bev(kx.size(), kx.data(), ky.data(), cx, cy, r2))
      continue;
    kept.push_back(dets[idx]);
    kx.push_back(cx);
    ky.push_back(cy);
  }
  return kept;
}

std::vector<bool> match_frame(const std::vector<Detection>& dets,
                              const std::vector<BBox3D>& gts, double d_threshold) {
  std::vector<bool> flags(dets.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  for (std::size_t k = 0; k < dets.size(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g]) continue;
      const double d = (dets[k].box.center - gts[g].center).norm();
      if (d <= d_threshold && d < best) {
        best = d;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      gt_used[best_gt] = true;
      flags[k] = true;
    }
  }
  return flags;
}

double average_precision(std::vector<PooledDetection> pool, std::int64_t n_gt,
                         bool* empty_flag) {
  if (empty_flag) *empty_flag = (n_gt == 0 && pool.empty());
  if (n_gt == 0) return 0.0;
  std::stable_sort(pool.begin(), pool.end(),
                   [](const PooledDetection& a, const PooledDetection& b) {
                     return a.confidence > b.confidence;
                   });
  std::vector<double> recalls, precisions;
  recalls.reserve(pool.size());
  precisions.reserve(pool.size());
  std::int64_t tp = 0, fp = 0;
  for (const auto& p : pool) {
    p.tp ? ++tp : ++fp;
    recalls.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    precisions.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double target = static_cast<double>(r) / 100.0;
    double best = 0.0;
    for (std::size_t k = 0; k < recalls.size(); ++k)
      if (recalls[k] >= target - 1e-12) best = std::max(best, precisions[k]);
    sum += best;
  }
  return sum / 101.0;
}

namespace {

struct AlignedFrame {
  const std::vector<Detection>* dets;
  const std::vector<BBox3D>* gts;
};

double safe_div(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct PassResult {
  std::int64_t tp = 0, fp = 0;
  std::vector<PooledDetection> pool;
};

PassResult matching_pass(const std::vector<std::vector<Detection>>& det_frames,
                         const std::vector<std::vector<BBox3D>>& gt_frames,
                         double threshold) {
  PassResult res;
  for (std::size_t f = 0; f < det_frames.size(); ++f) {
    const auto flags = match_frame(det_frames[f], gt_frames[f], threshold);
    for (std::size_t k = 0; k < flags.size(); ++k) {
      flags[k] ? ++res.tp : ++res.fp;
      res.pool.push_back(PooledDetection{det_frames[f][k].confidence, flags[k]});
    }
  }
  return res;
}

}  // namespace

MetricsReport evaluate(const std::vector<FrameDetections>& dets,
                       const std::vector<FrameDetections>& gts, const EvalConfig& cfg) {
  cfg.validate();
  if (dets.size() != gts.size()) throw std::invalid_argument("frame-mismatch");
  std::vector<const FrameDetections*> det_sorted, gt_sorted;
  for (const auto& f : dets) det_sorted.push_back(&f);
  for (const auto& f : gts) gt_sorted.push_back(&f);
  const auto by_frame = [](const FrameDetections* a, const FrameDetections* b) {
    return a->frame < b->frame;
  };
  std::sort(det_sorted.begin(), det_sorted.end(), by_frame);
  std::sort(gt_sorted.begin(), gt_sorted.end(), by_frame);
  for (std::size_t f = 0; f < det_sorted.size(); ++f)
    if (det_sorted[f]->frame != gt_sorted[f]->frame)
      throw std::invalid_argument("frame-mismatch");

  // crop, NMS, and per-frame confidence ordering
  std::vector<std::vector<Detection>> det_frames(det_sorted.size());
  std::vector<std::vector<BBox3D>> gt_frames(det_sorted.size());
  std::int64_t n_gt = 0;
  for (std::size_t f = 0; f < det_sorted.size(); ++f) {
    std::vector<Detection> frame_dets;
    for (const auto& d : det_sorted[f]->detections)
      if (!cfg.crop_to_range || cfg.range.contains(d.box.center)) frame_dets.push_back(d);
    if (cfg.apply_nms) frame_dets = circle_nms(frame_dets, cfg.nms_radius);
    std::stable_sort(frame_dets.begin(), frame_dets.end(),
                     [](const Detection& a, const Detection& b) {
                       return a.confidence > b.confidence;
                     });
    det_frames[f] = std::move(frame_dets);
    for (const auto& g : gt_sorted[f]->detections)
      if (!cfg.crop_to_range || cfg.range.contains(g.box.center))
        gt_frames[f].push_back(g.box);
    n_gt += static_cast<std::int64_t>(gt_frames[f].size());
  }

  std::vector<std::vector<Detection>> det_frames_thr(det_frames.size());
  for (std::size_t f = 0; f < det_frames.size(); ++f)
    for (const auto& d : det_frames[f])
      if (d.confidence >= cfg.score_threshold) det_frames_thr[f].push_back(d);

  MetricsReport report;
  report.score_threshold = cfg.score_threshold;
  bool any_empty = n_gt == 0;
  for (const double threshold : cfg.distance_thresholds) {
    const auto full = matching_pass(det_frames, gt_frames, threshold);
    const auto thr = matching_pass(det_frames_thr, gt_frames, threshold);
    ThresholdMetrics tm;
    tm.threshold = threshold;
    bool empty = false;
    tm.ap = average_precision(full.pool, n_gt, &empty);
    any_empty = any_empty && empty;
    tm.precision = safe_div(full.tp, full.tp + full.fp);
    tm.recall = safe_div(full.tp, n_gt);
    tm.precision_thresholded = safe_div(thr.tp, thr.tp + thr.fp);
    tm.recall_thresholded = safe_div(thr.tp, n_gt);
    tm.tp = full.tp;
    tm.fp = full.fp;
    tm.n_gt = n_gt;
    report.per_threshold.push_back(tm);
  }
  report.empty_benchmark = any_empty;
  const double n = static_cast<double>(report.per_threshold.size());
  for (const auto& tm : report.per_threshold) {
    report.map += tm.ap / n;
    report.mean_precision += tm.precision / n;
    report.mean_recall += tm.recall / n;
  }
  return report;
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  const auto col = [&](const std::string& name) {
    os.width(13);
    os << name;
  };
  const auto val = [&](double v) {
    os.width(13);
    os << v * 100.0;
  };
  for (const auto& tm : report.per_threshold) {
    std::ostringstream h;
    h << "AP(" << tm.threshold << ")";
    col(h.str());
  }
  for (const auto& tm : report.per_threshold) {
    std::ostringstream h;
    h << "Prec(" << tm.threshold << ")";
    col(h.str());
  }
  for (const auto& tm : report.per_threshold) {
    std::ostringstream h;
    h << "Recall(" << tm.threshold << ")";
    col(h.str());
  }
  col("mPrec");
  col("mRecall");
  col("mAP");
  os << "\n";
  for (const auto& tm : report.per_threshold) val(tm.ap);
  for (const auto& tm : report.per_threshold) val(tm.precision);
  for (const auto& tm : report.per_threshold) val(tm.recall);
  val(report.mean_precision);
  val(report.mean_recall);
  val(report.map);
  os << "\n";
  return os.str();
}

void save_report(const MetricsReport& report, const EvalConfig& cfg,
                 const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["per_threshold"] = nlohmann::json::array();
  for (const auto& tm : report.per_threshold) {
    nlohmann::ordered_json jt;
    jt["threshold"] = tm.threshold;
    jt["ap"] = tm.ap;
    jt["precision"] = tm.precision;
    jt["recall"] = tm.recall;
    jt["precision_thresholded"] = tm.precision_thresholded;
    jt["recall_thresholded"] = tm.recall_thresholded;
    jt["tp"] = tm.tp;
    jt["fp"] = tm.fp;
    jt["n_gt"] = tm.n_gt;
    doc["per_threshold"].push_back(std::move(jt));
  }
  doc["mAP"] = report.map;
  doc["mPrec"] = report.mean_precision;
  doc["mRecall"] = report.mean_recall;
  doc["empty_benchmark"] = report.empty_benchmark;
  doc["pr_integration"] = report.pr_integration;
  doc["score_threshold"] = report.score_threshold;
  doc["config"] = {{"distance_thresholds", cfg.distance_thresholds},
                   {"nms_radius", cfg.nms_radius},
                   {"apply_nms", cfg.apply_nms},
                   {"score_threshold", cfg.score_threshold},
                   {"crop_to_range", cfg.crop_to_range},
                   {"range",
                    {cfg.range.x_min, cfg.range.x_max, cfg.range.y_min, cfg.range.y_max,
                     cfg.range.z_min, cfg.range.z_max}}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace hunter
