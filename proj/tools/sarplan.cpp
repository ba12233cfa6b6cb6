// sarplan: constraints -> plan -> ik -> simulate -> image -> verify

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "sarplan/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace sarplan;

  CLI::App app{"UWB SAR scan planner, arm kinematics and point-target simulator"};
  app.require_subcommand(1);

  std::string config, out, trajectory, echoes, image, expect, mode, window, seed;
  double velocity = 0.0;

  const std::map<std::string, std::string> help = {
      {"constraints", "Derive resolution, aperture and sampling constraints (JSON)"},
      {"plan", "Plan the meander scan trajectory (trajectory.csv, plan.json)"},
      {"ik", "Solve joint trajectory for a planned scan (joints.csv, ik.json)"},
      {"simulate", "Synthesize point-target echoes along a trajectory (echoes.bin)"},
      {"image", "Back-project echoes onto the image grid (image.pgm, image.json, image.bin)"},
      {"verify", "Check an image against resolution/resolvability expectations"},
  };
  std::map<std::string, CLI::App*> commands;
  for (const auto& [name, description] : help) commands[name] = app.add_subcommand(name, description);

  for (auto& [name, cmd] : commands) {
    if (name != "verify") cmd->add_option("--config", config, "Run configuration JSON")->required();
    cmd->add_option("--out", out, "Output directory (overrides output_dir)");
  }
  commands["plan"]->add_option("--mode", mode, "stripmap|spotlight")->check(CLI::IsMember({"stripmap", "spotlight"}));
  commands["plan"]->add_option("--velocity", velocity, "Force cruise velocity, m/s");
  commands["ik"]->add_option("--trajectory", trajectory, "Trajectory CSV")->required();
  commands["ik"]->add_option("--seed-joints", seed, "Initial joints q1,...,q6 in radians");
  commands["simulate"]->add_option("--trajectory", trajectory, "Trajectory CSV")->required();
  commands["image"]->add_option("--echoes", echoes, "Echo binary")->required();
  commands["image"]->add_option("--window", window, "rect|hann")->check(CLI::IsMember({"rect", "hann"}));
  commands["verify"]->add_option("--image", image, "Raw image (image.bin, sidecar image.json beside it)")->required();
  commands["verify"]->add_option("--expect", expect, "Expectations JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CommandOptions options;
  try {
    if (!config.empty()) options.config = config;
    if (!out.empty()) options.out = out;
    if (!trajectory.empty()) options.trajectory = trajectory;
    if (!echoes.empty()) options.echoes = echoes;
    if (!image.empty()) options.image = image;
    if (!expect.empty()) options.expect = expect;
    if (!mode.empty()) options.mode = parse_scan_mode(mode);
    if (!window.empty()) options.window = parse_window(window);
    if (!seed.empty()) options.seed_joints = parse_joint_list(seed);
    if (commands["plan"]->count("--velocity") > 0) options.velocity = velocity;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return run_command(command, options, std::cout, std::cerr);
}
