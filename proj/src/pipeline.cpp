#include "hunter/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "hunter/io.hpp"

namespace hunter {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr double kPi = std::numbers::pi;

std::string frame_file_stem(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu", k);
  return buf;
}

ojson range_json(const DetectionRange& r) {
  return ojson{{"x", {r.x_min, r.x_max}}, {"y", {r.y_min, r.y_max}}, {"z", {r.z_min, r.z_max}}};
}

DetectionRange range_from_json(const json& j, DetectionRange base) {
  if (j.contains("x")) {
    base.x_min = j["x"].at(0);
    base.x_max = j["x"].at(1);
  }
  if (j.contains("y")) {
    base.y_min = j["y"].at(0);
    base.y_max = j["y"].at(1);
  }
  if (j.contains("z")) {
    base.z_min = j["z"].at(0);
    base.z_max = j["z"].at(1);
  }
  return base;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ojson config_json(const PipelineConfig& cfg) {
  ojson doc;
  doc["dataset"] = cfg.dataset;
  doc["manifest"] = cfg.manifest_path.string();
  doc["assets"] = cfg.asset_dir.string();
  if (cfg.ground_dir) doc["ground_dir"] = cfg.ground_dir->string();
  doc["seed"] = cfg.seed;
  doc["detection_range"] = range_json(cfg.range);
  doc["voxel_size"] = {cfg.voxel_size.x(), cfg.voxel_size.y(), cfg.voxel_size.z()};
  doc["bev_cell"] = cfg.bev_cell;
  doc["lidar"] = ojson{{"rows", cfg.lidar.rows},
                       {"cols", cfg.lidar.cols},
                       {"elev_deg", {cfg.lidar.min_elev_deg, cfg.lidar.max_elev_deg}},
                       {"max_range", cfg.lidar.max_range},
                       {"origin",
                        {cfg.lidar.origin.x(), cfg.lidar.origin.y(), cfg.lidar.origin.z()}}};
  doc["ransac"] = ojson{
      {"patch_size", cfg.ransac.patch_size},
      {"voxel_size",
       {cfg.ransac.voxel_size.x(), cfg.ransac.voxel_size.y(), cfg.ransac.voxel_size.z()}},
      {"inlier_threshold", cfg.ransac.inlier_threshold},
      {"min_plane_points", cfg.ransac.min_plane_points},
      {"max_below_fraction", cfg.ransac.max_below_fraction},
      {"max_below_mean_dist", cfg.ransac.max_below_mean_dist},
      {"max_tilt_deg", cfg.ransac.max_tilt_deg},
      {"confirm_reruns", cfg.ransac.confirm_reruns},
      {"iterations", cfg.ransac.iterations}};
  doc["insertion"] = ojson{{"max_occlusion", cfg.insertion.max_occlusion},
                           {"max_iou", cfg.insertion.max_iou},
                           {"max_failures", cfg.insertion.max_failures},
                           {"min_center_distance", cfg.insertion.min_center_distance},
                           {"target", {cfg.insertion.target_lo, cfg.insertion.target_hi}}};
  doc["mask"] = ojson{{"vacancy_z", {cfg.mask.vacancy_z_min, cfg.mask.vacancy_z_max}},
                      {"vacancy_voxel_z", cfg.mask.vacancy_voxel_z},
                      {"vacancy_empty_fraction", cfg.mask.vacancy_empty_fraction},
                      {"gaussian_overlap", cfg.mask.gaussian_overlap},
                      {"min_gaussian_radius", cfg.mask.min_gaussian_radius},
                      {"expand", {cfg.mask.expand_x, cfg.mask.expand_y}},
                      {"joint_min_points", cfg.mask.joint_min_points},
                      {"joint_radii",
                       {{"trunk", cfg.mask.radius_trunk},
                        {"legs", cfg.mask.radius_legs},
                        {"head", cfg.mask.radius_head},
                        {"arms", cfg.mask.radius_arms}}}};
  doc["loss"] = ojson{{"beta1", cfg.loss.beta1},   {"beta2", cfg.loss.beta2},
                      {"epsilon", cfg.loss.epsilon}, {"beta3", cfg.loss.beta3},
                      {"beta4", cfg.loss.beta4},   {"delta_var", cfg.loss.delta_var}};
  doc["filter"] = ojson{{"min_confidence", cfg.filter.min_confidence},
                        {"min_length", cfg.filter.min_length},
                        {"min_displacement", cfg.filter.min_displacement},
                        {"association_gate", cfg.filter.association_gate},
                        {"merge_iou", cfg.filter.merge_iou},
                        {"merge_center_dist", cfg.filter.merge_center_dist},
                        {"relocation_check", cfg.filter.relocation_check}};
  doc["eval"] = ojson{{"distance_thresholds", cfg.eval.distance_thresholds},
                      {"nms_radius", cfg.eval.nms_radius},
                      {"apply_nms", cfg.eval.apply_nms},
                      {"score_threshold", cfg.eval.score_threshold},
                      {"crop_to_range", cfg.eval.crop_to_range}};
  return doc;
}

void write_run_meta(const fs::path& path, const char* command, const PipelineConfig& cfg,
                    const ojson& extra) {
  ojson doc;
  doc["command"] = command;
  doc["seed"] = cfg.seed;
  for (const auto& [k, v] : extra.items()) doc[k] = v;
  doc["config"] = config_json(cfg);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << doc.dump(2) << "\n";
}

std::mutex g_log_mutex;

void warn(int& counter, const std::string& message) {
  std::scoped_lock lock(g_log_mutex);
  ++counter;
  std::fprintf(stderr, "warning: %s\n", message.c_str());
}

}  // namespace

PipelineConfig PipelineConfig::defaults_for(const std::string& dataset) {
  PipelineConfig cfg;
  cfg.dataset = dataset;
  if (dataset == "hucenlife") {
    cfg.range = DetectionRange{-25.6, 25.6, -51.2, 51.2, -2.5, 7.5};
    cfg.voxel_size = Vec3(0.025, 0.05, 0.25);
    cfg.bev_cell = 0.2;
    cfg.lidar = LidarSpec{128, 1024, -22.5, 22.5, 120.0, Vec3(0, 0, 0)};
  } else if (dataset == "stcrowd") {
    cfg.range = DetectionRange{-30.72, 30.72, -40.96, 40.96, -4.0, 1.0};
    cfg.voxel_size = Vec3(0.03, 0.04, 0.125);
    cfg.bev_cell = 0.16;
    cfg.lidar = LidarSpec{128, 1024, -45.0, 45.0, 120.0, Vec3(0, 0, 0)};
  } else if (dataset == "toy") {
    cfg.range = DetectionRange{-25.6, 25.6, -25.6, 25.6, -2.5, 7.5};
    cfg.voxel_size = Vec3(0.1, 0.1, 0.25);
    cfg.bev_cell = 0.4;
    cfg.lidar = LidarSpec{64, 512, -22.5, 22.5, 80.0, Vec3(0, 0, 1.5)};
  } else {
    throw std::invalid_argument("unknown dataset preset: " + dataset);
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  const auto doc = json::parse(in);
  PipelineConfig cfg = PipelineConfig::defaults_for(doc.value("dataset", "toy"));
  const fs::path base = fs::absolute(path).parent_path();
  const auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  if (doc.contains("manifest")) cfg.manifest_path = resolve(doc["manifest"]);
  if (doc.contains("assets")) cfg.asset_dir = resolve(doc["assets"]);
  if (doc.contains("ground_dir")) cfg.ground_dir = resolve(doc["ground_dir"]);
  maybe(doc, "seed", cfg.seed);
  if (doc.contains("detection_range")) cfg.range = range_from_json(doc["detection_range"], cfg.range);
  if (doc.contains("voxel_size")) {
    const auto& v = doc["voxel_size"];
    cfg.voxel_size = Vec3(v.at(0), v.at(1), v.at(2));
  }
  maybe(doc, "bev_cell", cfg.bev_cell);
  if (doc.contains("lidar")) {
    const auto& l = doc["lidar"];
    maybe(l, "rows", cfg.lidar.rows);
    maybe(l, "cols", cfg.lidar.cols);
    if (l.contains("elev_deg")) {
      cfg.lidar.min_elev_deg = l["elev_deg"].at(0);
      cfg.lidar.max_elev_deg = l["elev_deg"].at(1);
    }
    maybe(l, "max_range", cfg.lidar.max_range);
    if (l.contains("origin")) {
      const auto& o = l["origin"];
      cfg.lidar.origin = Vec3(o.at(0), o.at(1), o.at(2));
    }
  }
  if (doc.contains("ransac")) {
    const auto& r = doc["ransac"];
    maybe(r, "patch_size", cfg.ransac.patch_size);
    if (r.contains("voxel_size")) {
      const auto& v = r["voxel_size"];
      cfg.ransac.voxel_size = Vec3(v.at(0), v.at(1), v.at(2));
    }
    maybe(r, "inlier_threshold", cfg.ransac.inlier_threshold);
    maybe(r, "min_plane_points", cfg.ransac.min_plane_points);
    maybe(r, "max_below_fraction", cfg.ransac.max_below_fraction);
    maybe(r, "max_below_mean_dist", cfg.ransac.max_below_mean_dist);
    maybe(r, "max_tilt_deg", cfg.ransac.max_tilt_deg);
    maybe(r, "confirm_reruns", cfg.ransac.confirm_reruns);
    maybe(r, "iterations", cfg.ransac.iterations);
  }
  if (doc.contains("insertion")) {
    const auto& i = doc["insertion"];
    maybe(i, "max_occlusion", cfg.insertion.max_occlusion);
    maybe(i, "max_iou", cfg.insertion.max_iou);
    maybe(i, "max_failures", cfg.insertion.max_failures);
    maybe(i, "min_center_distance", cfg.insertion.min_center_distance);
    if (i.contains("target")) {
      cfg.insertion.target_lo = i["target"].at(0);
      cfg.insertion.target_hi = i["target"].at(1);
    }
  }
  if (doc.contains("mask")) {
    const auto& m = doc["mask"];
    if (m.contains("vacancy_z")) {
      cfg.mask.vacancy_z_min = m["vacancy_z"].at(0);
      cfg.mask.vacancy_z_max = m["vacancy_z"].at(1);
    }
    maybe(m, "vacancy_voxel_z", cfg.mask.vacancy_voxel_z);
    maybe(m, "vacancy_empty_fraction", cfg.mask.vacancy_empty_fraction);
    maybe(m, "gaussian_overlap", cfg.mask.gaussian_overlap);
    maybe(m, "min_gaussian_radius", cfg.mask.min_gaussian_radius);
    if (m.contains("expand")) {
      cfg.mask.expand_x = m["expand"].at(0);
      cfg.mask.expand_y = m["expand"].at(1);
    }
    maybe(m, "joint_min_points", cfg.mask.joint_min_points);
    if (m.contains("joint_radii")) {
      const auto& jr = m["joint_radii"];
      maybe(jr, "trunk", cfg.mask.radius_trunk);
      maybe(jr, "legs", cfg.mask.radius_legs);
      maybe(jr, "head", cfg.mask.radius_head);
      maybe(jr, "arms", cfg.mask.radius_arms);
    }
  }
  if (doc.contains("loss")) {
    const auto& l = doc["loss"];
    maybe(l, "beta1", cfg.loss.beta1);
    maybe(l, "beta2", cfg.loss.beta2);
    maybe(l, "epsilon", cfg.loss.epsilon);
    maybe(l, "beta3", cfg.loss.beta3);
    maybe(l, "beta4", cfg.loss.beta4);
    maybe(l, "delta_var", cfg.loss.delta_var);
  }
  if (doc.contains("filter")) {
    const auto& f = doc["filter"];
    maybe(f, "min_confidence", cfg.filter.min_confidence);
    maybe(f, "min_length", cfg.filter.min_length);
    maybe(f, "min_displacement", cfg.filter.min_displacement);
    maybe(f, "association_gate", cfg.filter.association_gate);
    maybe(f, "merge_iou", cfg.filter.merge_iou);
    maybe(f, "merge_center_dist", cfg.filter.merge_center_dist);
    maybe(f, "relocation_check", cfg.filter.relocation_check);
  }
  if (doc.contains("eval")) {
    const auto& e = doc["eval"];
    if (e.contains("distance_thresholds"))
      cfg.eval.distance_thresholds = e["distance_thresholds"].get<std::vector<double>>();
    maybe(e, "nms_radius", cfg.eval.nms_radius);
    maybe(e, "apply_nms", cfg.eval.apply_nms);
    maybe(e, "score_threshold", cfg.eval.score_threshold);
    maybe(e, "crop_to_range", cfg.eval.crop_to_range);
  }
  cfg.eval.range = cfg.range;
  if (!(cfg.range.x_min < cfg.range.x_max && cfg.range.y_min < cfg.range.y_max &&
        cfg.range.z_min < cfg.range.z_max))
    throw std::runtime_error("config: detection range must be well-ordered");
  if (!(cfg.bev_cell > 0)) throw std::runtime_error("config: bev_cell must be positive");
  return cfg;
}

std::string config_echo_json(const PipelineConfig& cfg) { return config_json(cfg).dump(2); }

std::size_t Manifest::frame_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.frames.size();
  return n;
}

void Manifest::validate() const {
  std::vector<std::string> ids;
  for (const auto& s : sequences)
    for (const auto& f : s.frames) ids.push_back(f.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw std::runtime_error("manifest: duplicate frame id");
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const auto doc = json::parse(in);
  const fs::path base = fs::absolute(path).parent_path();
  Manifest m;
  m.dataset = doc.value("dataset", "");
  for (const auto& js : doc.at("sequences")) {
    SequenceRecord seq;
    seq.id = js.at("id").get<std::string>();
    for (const auto& jf : js.at("frames")) {
      FrameRecord fr;
      fr.id = jf.at("id").get<std::string>();
      fr.cloud = base / jf.at("cloud").get<std::string>();
      if (jf.contains("gt")) fr.gt = base / jf.at("gt").get<std::string>();
      seq.frames.push_back(std::move(fr));
    }
    m.sequences.push_back(std::move(seq));
  }
  m.validate();
  return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  ojson doc;
  doc["dataset"] = manifest.dataset;
  doc["sequences"] = ojson::array();
  for (const auto& seq : manifest.sequences) {
    ojson js;
    js["id"] = seq.id;
    js["frames"] = ojson::array();
    for (const auto& fr : seq.frames) {
      ojson jf;
      jf["id"] = fr.id;
      jf["cloud"] = fs::relative(fr.cloud, base).generic_string();
      if (!fr.gt.empty()) jf["gt"] = fs::relative(fr.gt, base).generic_string();
      js["frames"].push_back(std::move(jf));
    }
    doc["sequences"].push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << doc.dump(2) << "\n";
}

std::vector<HumanAsset> load_asset_pool(const fs::path& dir) {
  std::vector<fs::path> objs;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".obj") objs.push_back(entry.path());
  std::sort(objs.begin(), objs.end());
  std::vector<HumanAsset> pool;
  for (const auto& obj : objs) {
    fs::path joints = obj;
    joints.replace_extension(".joints.json");
    pool.push_back(load_human_asset(obj, joints));
  }
  return pool;
}

int worker_count() {
  if (const char* env = std::getenv("HUNTER_FORGE_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

CommandResult cmd_segment_ground(const PipelineConfig& cfg, const fs::path& out_dir) {
  const Manifest manifest = load_manifest(cfg.manifest_path);
  fs::create_directories(out_dir);
  CommandResult res;
  std::size_t produced = 0;
  for (const auto& seq : manifest.sequences) {
    for (const auto& fr : seq.frames) {
      PointCloud cloud;
      try {
        cloud = read_point_cloud_bin(fr.cloud);
      } catch (const std::exception& e) {
        warn(res.warnings, "skipping frame " + fr.id + ": " + e.what());
        continue;
      }
      RansacConfig rc = cfg.ransac;
      rc.seed = derive_seed(cfg.seed, fnv1a64(fr.id));
      const GroundModel model = segment_ground(cloud, cfg.range, rc);
      save_ground_model(model, out_dir / (fr.id + ".ground.json"));
      ++produced;
    }
  }
  write_run_meta(out_dir / "run_meta.json", "segment-ground", cfg,
                 ojson{{"frames", produced}, {"warnings", res.warnings}});
  res.exit_code = res.warnings > 0 ? 2 : 0;
  res.message = std::to_string(produced) + " ground files";
  return res;
}

namespace {

struct BaseFrame {
  bool ok = false;
  std::string error;
  PointCloud cloud;
  GroundModel ground;
};

class BaseFrameCache {
 public:
  using Key = std::pair<std::size_t, std::size_t>;
  using Loader = std::function<std::shared_ptr<const BaseFrame>()>;

  std::shared_ptr<const BaseFrame> get(const Key& key, const Loader& loader) {
    std::shared_future<std::shared_ptr<const BaseFrame>> fut;
    std::optional<std::packaged_task<std::shared_ptr<const BaseFrame>()>> task;
    {
      std::scoped_lock lock(mu_);
      auto it = map_.find(key);
      if (it == map_.end()) {
        task.emplace(loader);
        fut = task->get_future().share();
        map_.emplace(key, fut);
      } else {
        fut = it->second;
      }
    }
    if (task) (*task)();
    return fut.get();
  }

 private:
  std::mutex mu_;
  std::map<Key, std::shared_future<std::shared_ptr<const BaseFrame>>> map_;
};

}  // namespace

CommandResult cmd_forge(const PipelineConfig& cfg, std::size_t n_frames,
                        const fs::path& out_dir) {
  const Manifest manifest = load_manifest(cfg.manifest_path);
  const auto assets = load_asset_pool(cfg.asset_dir);
  if (assets.empty()) {
    CommandResult res;
    res.exit_code = 1;
    res.message = "asset pool is empty: " + cfg.asset_dir.string();
    return res;
  }
  if (manifest.sequences.empty()) {
    CommandResult res;
    res.exit_code = 1;
    res.message = "manifest has no sequences";
    return res;
  }

  std::vector<std::size_t> counts;
  for (const auto& seq : manifest.sequences) counts.push_back(seq.frames.size());

  const std::string echo = config_echo_json(cfg);
  const std::uint64_t corpus_id = fnv1a64(echo + ":" + std::to_string(n_frames));
  char hex[24];
  std::snprintf(hex, sizeof(hex), "corpus-%016llx", static_cast<unsigned long long>(corpus_id));
  const fs::path corpus_dir = out_dir / hex;
  fs::create_directories(corpus_dir);

  BaseFrameCache cache;
  const auto load_base = [&](std::size_t si, std::size_t fi) {
    return cache.get({si, fi}, [&, si, fi]() -> std::shared_ptr<const BaseFrame> {
      auto base = std::make_shared<BaseFrame>();
      const FrameRecord& fr = manifest.sequences[si].frames[fi];
      try {
        base->cloud = read_point_cloud_bin(fr.cloud);
        bool loaded = false;
        if (cfg.ground_dir) {
          const fs::path gp = *cfg.ground_dir / (fr.id + ".ground.json");
          if (fs::exists(gp)) {
            base->ground = load_ground_model(gp, base->cloud);
            loaded = true;
          }
        }
        if (!loaded) {
          RansacConfig rc = cfg.ransac;
          rc.seed = derive_seed(cfg.seed, fnv1a64(fr.id));
          base->ground = segment_ground(base->cloud, cfg.range, rc);
        }
        base->ok = true;
      } catch (const std::exception& e) {
        base->error = e.what();
      }
      return base;
    });
  };

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> produced{0};
  int warnings = 0;
  const BevGrid grid = cfg.bev_grid();
  const int n_workers = std::max(1, std::min<int>(worker_count(), static_cast<int>(std::max<std::size_t>(1, n_frames))));

  const auto work = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= n_frames) return;
      Rng rng(derive_seed(cfg.seed, k));
      const auto [si, fi] = draw_frame_ref(counts, rng);
      const auto base = load_base(si, fi);
      if (!base->ok) {
        warn(warnings, "skipping output frame " + std::to_string(k) + " (" +
                           manifest.sequences[si].frames[fi].id + "): " + base->error);
        continue;
      }
      const SynthFrame frame =
          synthesize_frame(base->cloud, manifest.sequences[si].frames[fi].id, assets,
                           base->ground, cfg.lidar, cfg.insertion, cfg.mask, std::move(rng));
      const std::string stem = frame_file_stem(k);
      save_synth_frame(frame, corpus_dir / (stem + ".bin"),
                       corpus_dir / (stem + ".labels.json"));
      std::vector<BBox3D> boxes;
      for (const auto& label : frame.labels) boxes.push_back(label.box);
      const Mask m = vacant_ground_mask(frame.cloud, grid, cfg.mask);
      const HeatmapGrid y = render_heatmap(boxes, grid, cfg.mask);
      const Mask mstar = compose_training_mask(m, y);
      save_mask(m, corpus_dir / (stem + ".mask"));
      save_mask(mstar, corpus_dir / (stem + ".maskstar"));
      save_heatmap(y, corpus_dir / (stem + ".heat"));
      produced.fetch_add(1);
    }
  };

  std::vector<std::thread> threads;
  for (int t = 1; t < n_workers; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();

  write_run_meta(corpus_dir / "run_meta.json", "forge", cfg,
                 ojson{{"n_frames", n_frames},
                       {"produced", produced.load()},
                       {"warnings", warnings},
                       {"corpus", hex}});
  CommandResult res;
  res.warnings = warnings;
  res.exit_code = warnings > 0 ? 2 : 0;
  res.message = corpus_dir.string();
  return res;
}

CommandResult cmd_filter(const PipelineConfig& cfg, const fs::path& dets_in,
                         const fs::path& dets_out) {
  const auto frames = read_detections_jsonl(dets_in);
  const auto filtered = filter_labels(frames, cfg.filter);
  if (dets_out.has_parent_path()) fs::create_directories(dets_out.parent_path());
  write_detections_jsonl(filtered, dets_out);
  std::size_t in_count = 0, out_count = 0;
  for (const auto& f : frames) in_count += f.detections.size();
  for (const auto& f : filtered) out_count += f.detections.size();
  write_run_meta(dets_out.string() + ".meta.json", "filter", cfg,
                 ojson{{"input_detections", in_count}, {"output_detections", out_count}});
  CommandResult res;
  res.message = std::to_string(out_count) + "/" + std::to_string(in_count) + " detections kept";
  return res;
}

CommandResult cmd_update_mask(const PipelineConfig& cfg, const fs::path& mask_dir,
                              const fs::path& labels_path, const fs::path& out_dir) {
  const auto frames = read_detections_jsonl(labels_path);
  fs::create_directories(out_dir);
  CommandResult res;
  std::size_t produced = 0;
  for (const auto& fd : frames) {
    const std::string stem = frame_file_stem(static_cast<std::size_t>(fd.frame));
    const fs::path in_path = mask_dir / (stem + ".mask");
    if (!fs::exists(in_path)) {
      warn(res.warnings, "missing mask for frame " + std::to_string(fd.frame));
      continue;
    }
    const Mask m = load_mask(in_path);
    std::vector<BBox3D> boxes;
    for (const auto& d : fd.detections) boxes.push_back(d.box);
    const Mask updated = update_mask(m, boxes, cfg.mask);
    save_mask(updated, out_dir / (stem + ".mask"));
    ++produced;
  }
  write_run_meta(out_dir / "run_meta.json", "update-mask", cfg,
                 ojson{{"frames", produced}, {"warnings", res.warnings}});
  res.exit_code = res.warnings > 0 ? 2 : 0;
  res.message = std::to_string(produced) + " masks updated";
  return res;
}

CommandResult cmd_eval(const PipelineConfig& cfg, const fs::path& dets_path,
                       const fs::path& gt_path, const fs::path& report_path,
                       std::string* table) {
  const auto dets = read_detections_jsonl(dets_path);
  const auto gts = read_detections_jsonl(gt_path);
  EvalConfig ec = cfg.eval;
  ec.range = cfg.range;
  const MetricsReport report = evaluate(dets, gts, ec);
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  save_report(report, ec, report_path);
  write_run_meta(report_path.string() + ".meta.json", "eval", cfg,
                 ojson{{"mAP", report.map}});
  if (table) *table = report_table(report);
  CommandResult res;
  std::ostringstream msg;
  msg.setf(std::ios::fixed);
  msg.precision(4);
  msg << "mAP " << report.map;
  res.message = msg.str();
  return res;
}

namespace {

HeatmapGrid grid_from_rows(const json& rows) {
  const auto r = rows.size();
  const auto c = rows.at(0).size();
  const BevGrid grid{0.0, static_cast<double>(r), 0.0, static_cast<double>(c), 1.0};
  HeatmapGrid hm(grid);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      hm.values[i * c + j] = rows.at(i).at(j).get<double>();
  return hm;
}

json rows_from_values(const std::vector<double>& values, std::int64_t rows, std::int64_t cols) {
  json out = json::array();
  for (std::int64_t i = 0; i < rows; ++i) {
    json row = json::array();
    for (std::int64_t j = 0; j < cols; ++j)
      row.push_back(values[static_cast<std::size_t>(i * cols + j)]);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

CommandResult cmd_losscheck(const PipelineConfig& cfg, const fs::path& in_path,
                            const fs::path& out_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open " + in_path.string());
  const auto doc = json::parse(in);
  ojson out;
  double total = 0.0;
  bool have_total = false;
  HeatmapLossResult hm_res;
  BoxLossResult box_res;
  if (doc.contains("heatmap")) {
    const auto& h = doc["heatmap"];
    const HeatmapGrid pred = grid_from_rows(h.at("pred"));
    const HeatmapGrid target = grid_from_rows(h.at("target"));
    const HeatmapGrid mask_values = grid_from_rows(h.at("mask"));
    Mask mask(pred.grid);
    for (std::size_t k = 0; k < mask.cells.size(); ++k)
      mask.cells[k] = mask_values.values[k] != 0.0 ? 1 : 0;
    hm_res = heatmap_loss(pred, target, mask, cfg.loss);
    out["heatmap"] = ojson{{"value", hm_res.value},
                           {"grad", rows_from_values(hm_res.grad, pred.grid.rows(),
                                                     pred.grid.cols())}};
    have_total = true;
  }
  if (doc.contains("boxes")) {
    const auto& b = doc["boxes"];
    box_res = bbox_loss(b.at("pred").get<std::vector<std::vector<double>>>(),
                        b.at("gt").get<std::vector<std::vector<double>>>());
    out["bbox"] = ojson{{"value", box_res.value}, {"grad", box_res.grad}};
    have_total = true;
  }
  if (have_total) {
    total = total_loss(hm_res, box_res).value;
    out["total"] = total;
  }
  if (doc.contains("align")) {
    const auto& a = doc["align"];
    FeatureBatch fs_batch, fr_batch;
    fs_batch.features = a.at("f_s").get<std::vector<std::vector<double>>>();
    fs_batch.role = FeatureRole::synthetic;
    fr_batch.features = a.at("f_r").get<std::vector<std::vector<double>>>();
    fr_batch.role = FeatureRole::real;
    const AlignLossResult ar = align_loss(fs_batch, fr_batch, cfg.loss);
    out["align"] = ojson{{"l_s2r", ar.l_s2r},
                         {"l_norm", ar.l_norm},
                         {"l_total", ar.l_total},
                         {"grad_s", ar.grad_s},
                         {"grad_r", ar.grad_r}};
  }
  out["config"] = config_json(cfg);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot open " + out_path.string());
  os << out.dump(2) << "\n";
  CommandResult res;
  res.message = "loss dump written to " + out_path.string();
  return res;
}

namespace {

void append_cylinder(PointCloud& cloud, Rng& rng, const Vec3& center, double radius,
                     double height, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) {
    const double a = rng.uniform(0.0, 2.0 * kPi);
    const double z = rng.uniform(0.0, height);
    cloud.points.emplace_back(center.x() + radius * std::cos(a),
                              center.y() + radius * std::sin(a), center.z() + z);
  }
}

void append_wall(PointCloud& cloud, Rng& rng, const Vec3& start, double yaw, double length,
                 double height, std::size_t count) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = rng.uniform(0.0, length);
    const double z = rng.uniform(0.0, height);
    cloud.points.emplace_back(start.x() + c * u, start.y() + s * u, start.z() + z);
  }
}

}  // namespace

fs::path make_toy_dataset(const fs::path& dir, const ToyDatasetSpec& spec) {
  fs::create_directories(dir / "assets");
  for (int a = 0; a < spec.assets; ++a) {
    HumanoidParams params;
    params.height = 1.5 + 0.4 * a / std::max(1, spec.assets - 1);
    params.arm_angle = 0.15 + 0.05 * (a % 3);
    params.leg_angle = 0.10 + 0.04 * (a % 2);
    const HumanAsset asset = make_humanoid(params);
    const std::string stem = "human_" + std::to_string(a);
    save_human_asset(asset, dir / "assets" / (stem + ".obj"),
                     dir / "assets" / (stem + ".joints.json"));
  }

  Manifest manifest;
  manifest.dataset = "toy";
  for (int s = 0; s < spec.sequences; ++s) {
    Rng rng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(s)));
    const fs::path seq_dir = dir / ("seq_" + std::to_string(s));
    fs::create_directories(seq_dir);

    PointCloud statics;
    statics.points.reserve(spec.ground_points + 8000);
    for (std::size_t k = 0; k < spec.ground_points; ++k)
      statics.points.emplace_back(rng.uniform(-24.5, 24.5), rng.uniform(-24.5, 24.5),
                                  0.02 * gaussian(rng));
    for (int p = 0; p < 6; ++p) {
      const double a = rng.uniform(0.0, 2.0 * kPi);
      const double r = rng.uniform(6.0, 20.0);
      append_cylinder(statics, rng, Vec3(r * std::cos(a), r * std::sin(a), 0.0),
                      rng.uniform(0.2, 0.35), rng.uniform(2.5, 4.0), 500);
    }
    for (int w = 0; w < 2; ++w) {
      const double a = rng.uniform(0.0, 2.0 * kPi);
      const double r = rng.uniform(10.0, 20.0);
      append_wall(statics, rng, Vec3(r * std::cos(a), r * std::sin(a), 0.0),
                  rng.uniform(0.0, 2.0 * kPi), rng.uniform(4.0, 8.0), 2.5, 800);
    }

    // walking humanoids with ground-truth boxes
    struct Mover {
      std::vector<Vec3> base_points;
      Vec3 start;
      Vec3 step;
      double yaw;
    };
    std::vector<Mover> movers;
    for (int h = 0; h < 3; ++h) {
      HumanoidParams params;
      params.height = 1.55 + 0.05 * h + 0.1 * s;
      const double heading = rng.uniform(-kPi, kPi);
      params.yaw = heading;
      const HumanAsset asset = make_humanoid(params);
      Mover mover;
      for (std::size_t v = 0; v < asset.vertices.size(); v += 3)
        mover.base_points.push_back(asset.vertices[v]);
      const double a = rng.uniform(0.0, 2.0 * kPi);
      const double r = rng.uniform(6.0, 16.0);
      mover.start = Vec3(r * std::cos(a), r * std::sin(a), 0.0);
      const double speed = rng.uniform(0.12, 0.16);
      mover.step = Vec3(speed * std::cos(heading), speed * std::sin(heading), 0.0);
      mover.yaw = heading;
      movers.push_back(std::move(mover));
    }

    SequenceRecord seq;
    seq.id = "seq_" + std::to_string(s);
    const fs::path gt_path = seq_dir / "gt.jsonl";
    std::vector<FrameDetections> gt_frames;
    for (int f = 0; f < spec.frames_per_sequence; ++f) {
      PointCloud cloud = statics;
      FrameDetections gt;
      gt.frame = f;
      for (const auto& mover : movers) {
        const Vec3 pos = mover.start + static_cast<double>(f) * mover.step;
        PointCloud body;
        for (const auto& bp : mover.base_points) body.points.push_back(bp + pos);
        cloud.points.insert(cloud.points.end(), body.points.begin(), body.points.end());
        Detection det;
        det.frame = f;
        det.box = fit_bbox(body, mover.yaw);
        det.confidence = 1.0;
        gt.detections.push_back(det);
      }
      gt_frames.push_back(std::move(gt));

      char name[32];
      std::snprintf(name, sizeof(name), "frame_%03d.bin", f);
      write_point_cloud_bin(cloud, seq_dir / name);
      char fid[32];
      std::snprintf(fid, sizeof(fid), "s%d_f%03d", s, f);
      seq.frames.push_back(FrameRecord{fid, seq_dir / name, gt_path});
    }
    write_detections_jsonl(gt_frames, gt_path);
    manifest.sequences.push_back(std::move(seq));
  }
  const fs::path manifest_path = dir / "manifest.json";
  save_manifest(manifest, manifest_path);

  // ready-to-run config beside the data
  ojson cfg;
  cfg["dataset"] = "toy";
  cfg["manifest"] = "manifest.json";
  cfg["assets"] = "assets";
  cfg["seed"] = 7;
  std::ofstream cfg_out(dir / "config.json");
  cfg_out << cfg.dump(2) << "\n";
  return manifest_path;
}

}  // namespace hunter
