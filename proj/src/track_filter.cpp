#include "hunter/track_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace hunter {

namespace {
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat10 = Eigen::Matrix<double, 10, 10>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat7x10 = Eigen::Matrix<double, 7, 10>;
}  // namespace

BBox3D TrackState::box() const {
  BBox3D b;
  b.center = Vec3(mean[0], mean[1], mean[2]);
  b.dims = Vec3(std::max(mean[3], 1e-9), std::max(mean[4], 1e-9), std::max(mean[5], 1e-9));
  b.yaw = wrap_angle(mean[6]);
  return b;
}

double Tracklet::displacement() const {
  double best = 0.0;
  for (std::size_t i = 0; i < detections.size(); ++i)
    for (std::size_t j = i + 1; j < detections.size(); ++j)
      best = std::max(best, center_distance(detections[i].box, detections[j].box));
  return best;
}

void FilterConfig::validate() const {
  if (min_confidence < 0 || min_length < 0 || min_displacement < 0 ||
      association_gate < 0 || merge_iou < 0 || merge_center_dist < 0 ||
      !(process_pos_var > 0) || !(process_vel_var > 0) || !(meas_var > 0) ||
      !(init_vel_var > 0))
    throw std::invalid_argument("filter-config: thresholds must be >= 0");
}

TrackState make_track_state(const Detection& det, const FilterConfig& cfg) {
  TrackState st;
  st.mean << det.box.center.x(), det.box.center.y(), det.box.center.z(),
      det.box.dims.x(), det.box.dims.y(), det.box.dims.z(), det.box.yaw, 0, 0, 0;
  Vec10 diag;
  diag << cfg.meas_var, cfg.meas_var, cfg.meas_var, cfg.meas_var, cfg.meas_var,
      cfg.meas_var, cfg.meas_var, cfg.init_vel_var, cfg.init_vel_var, cfg.init_vel_var;
  st.cov = diag.asDiagonal();
  return st;
}

TrackState predict(const TrackState& state, int dt, const FilterConfig& cfg) {
  if (dt < 1) throw std::invalid_argument("predict: dt must be >= 1");
  Mat10 f = Mat10::Identity();
  f(0, 7) = f(1, 8) = f(2, 9) = static_cast<double>(dt);
  Vec10 q_diag;
  q_diag << cfg.process_pos_var, cfg.process_pos_var, cfg.process_pos_var,
      cfg.process_pos_var, cfg.process_pos_var, cfg.process_pos_var, cfg.process_pos_var,
      cfg.process_vel_var, cfg.process_vel_var, cfg.process_vel_var;
  TrackState out;
  out.mean = f * state.mean;
  out.cov = f * state.cov * f.transpose() + Mat10(q_diag.asDiagonal()) * dt;
  return out;
}

AssociationResult associate(const std::vector<BBox3D>& predictions,
                            const std::vector<Detection>& detections,
                            const FilterConfig& cfg) {
  struct Pair {
    double dist;
    std::size_t pred, det;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double d = center_distance(predictions[i], detections[j].box);
      if (d <= cfg.association_gate) pairs.push_back({d, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.det < b.det;
  });
  AssociationResult out;
  std::vector<bool> pred_used(predictions.size(), false), det_used(detections.size(), false);
  for (const auto& p : pairs) {
    if (pred_used[p.pred] || det_used[p.det]) continue;
    pred_used[p.pred] = det_used[p.det] = true;
    out.matches.emplace_back(p.pred, p.det);
  }
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (!pred_used[i]) out.unmatched_predictions.push_back(i);
  for (std::size_t j = 0; j < detections.size(); ++j)
    if (!det_used[j]) out.unmatched_detections.push_back(j);
  return out;
}

TrackState update(const TrackState& state, const Detection& det, const FilterConfig& cfg) {
  Mat7x10 h = Mat7x10::Zero();
  for (int k = 0; k < 7; ++k) h(k, k) = 1.0;
  const Mat7 r = Mat7::Identity() * cfg.meas_var;

  Vec7 z;
  z << det.box.center.x(), det.box.center.y(), det.box.center.z(), det.box.dims.x(),
      det.box.dims.y(), det.box.dims.z(), det.box.yaw;
  Vec7 innovation = z - h * state.mean;
  innovation[6] = wrap_innovation(innovation[6]);

  const Mat7 s = h * state.cov * h.transpose() + r;
  const Eigen::Matrix<double, 10, 7> k_gain = state.cov * h.transpose() * s.inverse();

  TrackState out;
  out.mean = state.mean + k_gain * innovation;
  out.mean[6] = wrap_angle(out.mean[6]);
  const Mat10 ikh = Mat10::Identity() - k_gain * h;
  out.cov = ikh * state.cov * ikh.transpose() + k_gain * r * k_gain.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

std::vector<Tracklet> track_direction(const std::vector<FrameDetections>& frames,
                                      TrackDirection direction, const FilterConfig& cfg) {
  cfg.validate();
  std::vector<const FrameDetections*> order;
  order.reserve(frames.size());
  for (const auto& f : frames) order.push_back(&f);
  if (direction == TrackDirection::backward) std::reverse(order.begin(), order.end());

  std::vector<Tracklet> done;
  std::vector<Tracklet> alive;
  std::vector<std::int64_t> alive_last_frame;

  for (const FrameDetections* fd : order) {
    std::vector<Detection> dets;
    for (const auto& d : fd->detections)
      if (d.confidence >= cfg.min_confidence) dets.push_back(d);

    std::vector<BBox3D> predictions;
    std::vector<TrackState> predicted_states;
    predictions.reserve(alive.size());
    for (std::size_t k = 0; k < alive.size(); ++k) {
      const auto dt = std::max<std::int64_t>(1, std::abs(fd->frame - alive_last_frame[k]));
      predicted_states.push_back(predict(alive[k].state, static_cast<int>(dt), cfg));
      predictions.push_back(predicted_states.back().box());
    }

    const auto assoc = associate(predictions, dets, cfg);

    std::vector<Tracklet> next_alive;
    std::vector<std::int64_t> next_last;
    for (const auto& [pi, dj] : assoc.matches) {
      Tracklet t = std::move(alive[pi]);
      t.state = update(predicted_states[pi], dets[dj], cfg);
      t.detections.push_back(dets[dj]);
      next_alive.push_back(std::move(t));
      next_last.push_back(fd->frame);
    }
    // unmatched tracklets close immediately
    for (const auto pi : assoc.unmatched_predictions) {
      alive[pi].status = TrackStatus::closed;
      done.push_back(std::move(alive[pi]));
    }
    for (const auto dj : assoc.unmatched_detections) {
      Tracklet t;
      t.state = make_track_state(dets[dj], cfg);
      t.detections.push_back(dets[dj]);
      next_alive.push_back(std::move(t));
      next_last.push_back(fd->frame);
    }
    alive = std::move(next_alive);
    alive_last_frame = std::move(next_last);
  }
  for (auto& t : alive) {
    t.status = TrackStatus::closed;
    done.push_back(std::move(t));
  }
  if (direction == TrackDirection::backward) {
    for (auto& t : done)
      std::sort(t.detections.begin(), t.detections.end(),
                [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
  }
  return done;
}

std::vector<FrameDetections> filter_labels(const std::vector<FrameDetections>& frames,
                                           const FilterConfig& cfg) {
  cfg.validate();
  // tag detections so both directions refer to the same input identities
  std::vector<FrameDetections> tagged = frames;
  std::int64_t next_index = 0;
  for (auto& fd : tagged)
    for (auto& d : fd.detections) d.input_index = next_index++;

  const auto keep = [&](const Tracklet& t) {
    if (t.length() < static_cast<std::size_t>(cfg.min_length)) return false;
    if (cfg.relocation_check && t.displacement() < cfg.min_displacement) return false;
    return true;
  };

  std::unordered_set<std::int64_t> fw_survivors, bw_survivors;
  for (const auto& t : track_direction(tagged, TrackDirection::forward, cfg))
    if (keep(t))
      for (const auto& d : t.detections) fw_survivors.insert(d.input_index);
  for (const auto& t : track_direction(tagged, TrackDirection::backward, cfg))
    if (keep(t))
      for (const auto& d : t.detections) bw_survivors.insert(d.input_index);

  std::vector<FrameDetections> out;
  out.reserve(tagged.size());
  for (const auto& fd : tagged) {
    std::vector<const Detection*> candidates;
    for (const auto& d : fd.detections)
      if (fw_survivors.count(d.input_index) || bw_survivors.count(d.input_index))
        candidates.push_back(&d);
    std::sort(candidates.begin(), candidates.end(),
              [](const Detection* a, const Detection* b) {
                if (a->confidence != b->confidence) return a->confidence > b->confidence;
                return a->input_index < b->input_index;
              });
    std::vector<const Detection*> kept;
    for (const Detection* d : candidates) {
      bool duplicate = false;
      for (const Detection* k : kept) {
        if (bev_iou(d->box, k->box) > cfg.merge_iou ||
            center_distance(d->box, k->box) < cfg.merge_center_dist) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) kept.push_back(d);
    }
    std::sort(kept.begin(), kept.end(), [](const Detection* a, const Detection* b) {
      return a->input_index < b->input_index;
    });
    FrameDetections ofd;
    ofd.frame = fd.frame;
    for (const Detection* d : kept) ofd.detections.push_back(*d);
    out.push_back(std::move(ofd));
  }
  return out;
}

std::vector<FrameDetections> read_detections_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<FrameDetections> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto doc = nlohmann::json::parse(line);
    FrameDetections fd;
    fd.frame = doc.at("frame").get<std::int64_t>();
    for (const auto& row : doc.at("boxes")) {
      Detection d;
      d.frame = fd.frame;
      d.box.center = Vec3(row.at(0), row.at(1), row.at(2));
      d.box.dims = Vec3(row.at(3), row.at(4), row.at(5));
      d.box.yaw = wrap_angle(row.at(6));
      d.confidence = row.at(7);
      fd.detections.push_back(d);
    }
    out.push_back(std::move(fd));
  }
  return out;
}

void write_detections_jsonl(const std::vector<FrameDetections>& frames,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (const auto& fd : frames) {
    nlohmann::ordered_json doc;
    doc["frame"] = fd.frame;
    auto& boxes = doc["boxes"] = nlohmann::json::array();
    for (const auto& d : fd.detections)
      boxes.push_back({d.box.center.x(), d.box.center.y(), d.box.center.z(),
                       d.box.dims.x(), d.box.dims.y(), d.box.dims.z(), d.box.yaw,
                       d.confidence});
    out << doc.dump() << "\n";
  }
}

}  // namespace hunter
