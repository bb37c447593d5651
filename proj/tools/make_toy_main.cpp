#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hunter/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the bundled procedural toy dataset (scenes, GT, assets)"};
  std::string out_dir;
  hunter::ToyDatasetSpec spec;
  app.add_option("--out", out_dir)->required();
  app.add_option("--seed", spec.seed);
  app.add_option("--sequences", spec.sequences);
  app.add_option("--frames", spec.frames_per_sequence);
  app.add_option("--assets", spec.assets);
  app.add_option("--ground-points", spec.ground_points);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto manifest = hunter::make_toy_dataset(out_dir, spec);
    std::cout << manifest.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
