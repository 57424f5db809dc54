// Renders a synthetic capture (rig.json plus all passes and cameras).

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "synthetic_scene.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Render a synthetic glass scene"};
  std::string out;
  double scale = 1.0;
  bool no_chalk = false;
  long long seed = -1;
  int glasses = 4;
  int distractors = 0;
  app.add_option("output", out, "scene directory to create")->required();
  app.add_option("--scale", scale, "image size relative to 1280x720")->check(CLI::Range(0.05, 4.0));
  app.add_flag("--no-chalk", no_chalk, "omit the chalk pass");
  app.add_option("--seed", seed, "random layout seed (default: fixed four-glass layout)");
  app.add_option("--glasses", glasses, "glasses in a random layout")->check(CLI::Range(0, 12));
  app.add_option("--distractors", distractors, "non-glass objects in a random layout")->check(CLI::Range(0, 12));
  CLI11_PARSE(app, argc, argv);

  const synth::Scene scene =
      seed < 0 ? synth::four_glass_scene() : synth::random_scene(static_cast<std::uint64_t>(seed), glasses, distractors);
  try {
    synth::write_scene_directory(scene, out, scale, !no_chalk);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cout << out << ": " << scene.objects.size() << " objects\n";
  return 0;
}
