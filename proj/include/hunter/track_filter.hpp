#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "hunter/geometry.hpp"

namespace hunter {

struct Detection {
  std::int64_t frame = 0;
  BBox3D box;
  double confidence = 1.0;
  std::int64_t input_index = -1;  // identity tag assigned by the filter
};

struct FrameDetections {
  std::int64_t frame = 0;
  std::vector<Detection> detections;
};

// Constant-velocity state: (x, y, z, l, w, h, yaw, vx, vy, vz).
struct TrackState {
  Eigen::Matrix<double, 10, 1> mean = Eigen::Matrix<double, 10, 1>::Zero();
  Eigen::Matrix<double, 10, 10> cov = Eigen::Matrix<double, 10, 10>::Identity();

  BBox3D box() const;
};

enum class TrackStatus { alive, closed };

struct Tracklet {
  std::vector<Detection> detections;  // frames strictly increasing
  TrackState state;
  TrackStatus status = TrackStatus::alive;

  std::size_t length() const { return detections.size(); }
  // max pairwise center distance along the tracklet
  double displacement() const;
};

struct FilterConfig {
  double min_confidence = 0.5;
  int min_length = 3;
  double min_displacement = 2.0;      // meters
  double association_gate = 2.0;      // center distance, meters
  double merge_iou = 0.3;             // duplicate if BEV IoU exceeds this
  double merge_center_dist = 0.3;     // or centers closer than this
  bool relocation_check = true;       // stationary-sensor displacement rule
  // diagonal noise model
  double process_pos_var = 0.1;       // per frame, observed dims
  double process_vel_var = 1.0;
  double meas_var = 0.05;
  double init_vel_var = 10.0;

  void validate() const;
};

enum class TrackDirection { forward, backward };

// Constant-velocity propagation over dt frames (dims and yaw persist).
TrackState predict(const TrackState& state, int dt, const FilterConfig& cfg);

TrackState make_track_state(const Detection& det, const FilterConfig& cfg);

struct AssociationResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (pred, det)
  std::vector<std::size_t> unmatched_predictions;
  std::vector<std::size_t> unmatched_detections;
};

// Greedy nearest-center association inside the gate; ties break on lower
// prediction index, then lower detection index.
AssociationResult associate(const std::vector<BBox3D>& predictions,
                            const std::vector<Detection>& detections,
                            const FilterConfig& cfg);

// Kalman measurement update with (center, dims, yaw); the yaw innovation is
// wrapped to (-pi, pi] and the covariance stays PSD (Joseph form).
TrackState update(const TrackState& state, const Detection& det, const FilterConfig& cfg);

// Track one direction. Low-confidence detections are dropped up front,
// unmatched tracklets close immediately, unmatched detections spawn new
// tracklets. Backward runs on reversed frame order and re-indexes.
std::vector<Tracklet> track_direction(const std::vector<FrameDetections>& frames,
                                      TrackDirection direction, const FilterConfig& cfg);

// Bi-directional pseudo-label filter: keep tracklets that are long enough
// and (for stationary sensors) have relocated, merge both directions and
// de-duplicate per frame.
std::vector<FrameDetections> filter_labels(const std::vector<FrameDetections>& frames,
                                           const FilterConfig& cfg);

// JSON lines, one frame per line:
// {"frame": f, "boxes": [[cx,cy,cz,l,w,h,yaw,score], ...]}
std::vector<FrameDetections> read_detections_jsonl(const std::filesystem::path& path);
void write_detections_jsonl(const std::vector<FrameDetections>& frames,
                            const std::filesystem::path& path);

}  // namespace hunter
