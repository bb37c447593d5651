#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hunter/pipeline.hpp"

namespace {

hunter::PipelineConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  auto cfg = hunter::load_pipeline_config(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR human-insertion scene forge, supervision and evaluation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path, in_path, masks_path, labels_path, dets_path, gt_path;
  std::optional<std::uint64_t> seed;
  std::size_t n_frames = 0;

  auto* seg = app.add_subcommand("segment-ground", "Segment per-frame ground point clouds");
  seg->add_option("--config", config_path)->required();
  seg->add_option("--out", out_path)->required();
  seg->add_option("--seed", seed);

  auto* forge = app.add_subcommand("forge", "Synthesize labeled frames with inserted humans");
  forge->add_option("--config", config_path)->required();
  forge->add_option("--out", out_path)->required();
  forge->add_option("--frames", n_frames)->required();
  forge->add_option("--seed", seed);

  auto* filter = app.add_subcommand("filter", "Bi-directional pseudo-label filter");
  filter->add_option("--config", config_path)->required();
  filter->add_option("--in", in_path)->required();
  filter->add_option("--out", out_path)->required();
  filter->add_option("--seed", seed);

  auto* upd = app.add_subcommand("update-mask", "Expand receptive-field masks from pseudo-labels");
  upd->add_option("--config", config_path)->required();
  upd->add_option("--masks", masks_path)->required();
  upd->add_option("--labels", labels_path)->required();
  upd->add_option("--out", out_path)->required();
  upd->add_option("--seed", seed);

  auto* eval = app.add_subcommand("eval", "Detection metrics (circle NMS + center-distance AP)");
  eval->add_option("--config", config_path)->required();
  eval->add_option("--dets", dets_path)->required();
  eval->add_option("--gt", gt_path)->required();
  eval->add_option("--out", out_path)->required();
  eval->add_option("--seed", seed);

  auto* loss = app.add_subcommand("losscheck", "Dump loss values and gradients for serialized inputs");
  loss->add_option("--config", config_path)->required();
  loss->add_option("--in", in_path)->required();
  loss->add_option("--out", out_path)->required();
  loss->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    hunter::CommandResult res;
    if (seg->parsed()) {
      res = hunter::cmd_segment_ground(load_config(config_path, seed), out_path);
    } else if (forge->parsed()) {
      res = hunter::cmd_forge(load_config(config_path, seed), n_frames, out_path);
    } else if (filter->parsed()) {
      res = hunter::cmd_filter(load_config(config_path, seed), in_path, out_path);
    } else if (upd->parsed()) {
      res = hunter::cmd_update_mask(load_config(config_path, seed), masks_path, labels_path,
                                    out_path);
    } else if (eval->parsed()) {
      std::string table;
      res = hunter::cmd_eval(load_config(config_path, seed), dets_path, gt_path, out_path,
                             &table);
      std::cout << table;
    } else if (loss->parsed()) {
      res = hunter::cmd_losscheck(load_config(config_path, seed), in_path, out_path);
    }
    if (!res.message.empty()) std::cout << res.message << "\n";
    return res.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
