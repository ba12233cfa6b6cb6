#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "sarplan/pipeline.hpp"

using namespace sarplan;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sarplan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = base_config();
  }
  void TearDown() override { fs::remove_all(dir_); }

  Json base_config() const {
    Json config = Json::parse(R"({
      "schema_version": 1,
      "radar": {"center_frequency": 8e9, "bandwidth": 4e9, "prf": 12,
                "beamwidth_x_deg": 20, "beamwidth_y_deg": 20, "tx_rx_offset": 0.06},
      "scene": {"target_dx": 0.5, "target_dy": 0.3, "standoff_range": 0.5, "relative_permittivity": 1,
                "center": [0, 1, 0.3], "aperture_length_x": 0.8, "aperture_length_y": 0.5,
                "scatterers": [{"position": [0, 1, 0.3], "reflectivity": 1}]},
      "mode": "stripmap", "accel_duration": 2.0, "window": "rect",
      "plan": {"max_slices": 1},
      "simulation": {"n_freqs": 128, "grid": {"spacing": [0.005, 0.005, 0.005], "counts": [120, 120, 1]}}
    })");
    config["output_dir"] = (dir_ / "out").string();
    return config;
  }

  fs::path write_config(const Json& config, const std::string& name = "config.json") const {
    const fs::path path = dir_ / name;
    std::ofstream(path) << config.dump(2);
    return path;
  }

  int run(const std::string& command, CommandOptions options) {
    out_.str("");
    err_.str("");
    return run_command(command, options, out_, err_);
  }

  CommandOptions with_config(const Json& config) const {
    CommandOptions options;
    options.config = write_config(config);
    return options;
  }

  static std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  fs::path dir_;
  Json config_;
  std::stringstream out_;
  std::stringstream err_;
};

}  // namespace

TEST_F(Cli, ConstraintsReportsRangeResolution) {
  ASSERT_EQ(run("constraints", with_config(config_)), kExitOk) << err_.str();
  const Json report = Json::parse(out_.str());
  EXPECT_EQ(report["schema_version"], 1);
  EXPECT_NEAR(report["range_resolution"].get<double>(), 0.0375, 0.0375e-3);
  EXPECT_DOUBLE_EQ(report["aperture_length_x"].get<double>(), 0.8);
  for (const char* key : {"cross_range_resolution_x", "cross_range_resolution_y", "scan_margin_x", "scan_margin_y",
                          "aperture_length_y", "sampling_spacing_x", "sampling_spacing_y", "max_velocity"}) {
    EXPECT_TRUE(report.contains(key)) << key;
  }
}

TEST_F(Cli, MissingBandwidthNamesField) {
  config_["radar"].erase("bandwidth");
  EXPECT_EQ(run("constraints", with_config(config_)), kExitConfig);
  EXPECT_NE(err_.str().find("radar.bandwidth"), std::string::npos) << err_.str();
}

TEST_F(Cli, ConfigFieldPaths) {
  const std::vector<std::pair<std::function<void(Json&)>, std::string>> cases = {
      {[](Json& c) { c["radar"]["prf"] = -1; }, "radar.prf"},
      {[](Json& c) { c["radar"]["beamwidth_x_deg"] = 200; }, "radar.beamwidth_x_deg"},
      {[](Json& c) { c["scene"]["relative_permittivity"] = 0.5; }, "scene.relative_permittivity"},
      {[](Json& c) { c["scene"]["center"] = Json::array({1, 2}); }, "scene.center"},
      {[](Json& c) { c["scene"]["scatterers"][0].erase("position"); }, "scene.scatterers[0].position"},
      {[](Json& c) { c["mode"] = "circular"; }, "mode"},
      {[](Json& c) { c["window"] = "kaiser"; }, "window"},
      {[](Json& c) { c["plan"]["max_slices"] = 0; }, "plan.max_slices"},
      {[](Json& c) { c["simulation"]["grid"]["counts"][1] = 0; }, "simulation.grid.counts[1]"},
      {[](Json& c) { c["scene"]["aperture_length_x"] = 0.5; }, "scene.aperture_length_x"},
      {[](Json& c) { c["schema_version"] = 2; }, "schema_version"},
      {[](Json& c) { c["radar"]["bandwidth"] = "wide"; }, "radar.bandwidth"},
  };
  for (const auto& [mutate, field] : cases) {
    Json config = base_config();
    mutate(config);
    EXPECT_EQ(run("constraints", with_config(config)), kExitConfig) << field;
    EXPECT_NE(err_.str().find(field), std::string::npos) << field << " -> " << err_.str();
  }
}

TEST_F(Cli, PermittivityHalvesSpacings) {
  ASSERT_EQ(run("constraints", with_config(config_)), kExitOk);
  const Json air = Json::parse(out_.str());
  config_["scene"]["relative_permittivity"] = 4;
  ASSERT_EQ(run("constraints", with_config(config_)), kExitOk);
  const Json dense = Json::parse(out_.str());
  for (const char* key : {"sampling_spacing_x", "sampling_spacing_y", "max_velocity"}) {
    EXPECT_NEAR(dense[key].get<double>() * 2.0, air[key].get<double>(), 1e-15) << key;
  }
}

TEST_F(Cli, PlanCsvSpacing) {
  ASSERT_EQ(run("plan", with_config(config_)), kExitOk) << err_.str();
  std::ifstream csv(dir_ / "out" / "trajectory.csv");
  const PoseTrajectory t = read_trajectory_csv(csv);
  double max_dx = 0.0;
  for (std::size_t i = 1; i < t.samples.size(); ++i) {
    if (t.samples[i].imaging && t.samples[i - 1].imaging) {
      max_dx = std::max(max_dx, std::abs(t.samples[i].position.x() - t.samples[i - 1].position.x()));
    }
  }
  EXPECT_NEAR(max_dx, 0.00833, 1e-5);
  const Json summary = Json::parse(slurp(dir_ / "out" / "plan.json"));
  EXPECT_EQ(summary["violations"].size(), 0u);
  EXPECT_NEAR(summary["segment_duration"].get<double>(), 10.0, 1e-9);
}

TEST_F(Cli, SpotlightSharesPositions) {
  ASSERT_EQ(run("plan", with_config(config_)), kExitOk);
  const std::string strip = slurp(dir_ / "out" / "trajectory.csv");
  CommandOptions options = with_config(config_);
  options.mode = ScanMode::spotlight;
  options.out = dir_ / "spot";
  ASSERT_EQ(run("plan", options), kExitOk);
  std::stringstream a(strip), b(slurp(dir_ / "spot" / "trajectory.csv"));
  const PoseTrajectory ts = read_trajectory_csv(a), tp = read_trajectory_csv(b);
  ASSERT_EQ(ts.samples.size(), tp.samples.size());
  bool differ = false;
  for (std::size_t i = 0; i < ts.samples.size(); ++i) {
    EXPECT_EQ(ts.samples[i].position, tp.samples[i].position);
    differ = differ || !ts.samples[i].orientation.isApprox(tp.samples[i].orientation, 1e-9);
  }
  EXPECT_TRUE(differ);
}

TEST_F(Cli, ForcedVelocityViolationExitsThree) {
  CommandOptions options = with_config(config_);
  options.velocity = 0.2;
  EXPECT_EQ(run("plan", options), kExitPlan);
  EXPECT_NE(err_.str().find("speed"), std::string::npos);
  EXPECT_NE(err_.str().find("sample"), std::string::npos);
}

TEST_F(Cli, IkWithinLimits) {
  ASSERT_EQ(run("plan", with_config(config_)), kExitOk);
  CommandOptions options = with_config(config_);
  options.trajectory = dir_ / "out" / "trajectory.csv";
  ASSERT_EQ(run("ik", options), kExitOk) << err_.str();
  std::ifstream csv(dir_ / "out" / "joints.csv");
  const JointTrajectory joints = read_joint_csv(csv);
  const ArmModel arm = default_arm_model();
  ASSERT_EQ(joints.samples.size(), 121u);
  for (const JointSample& s : joints.samples) EXPECT_TRUE(arm.within_limits(s.joints));
}

TEST_F(Cli, UnreachableSceneExitsFour) {
  config_["scene"]["standoff_range"] = 10.0;
  config_["scene"]["center"] = Json::array({0, 10.5, 0.3});
  config_["scene"].erase("aperture_length_x");
  config_["scene"].erase("aperture_length_y");
  ASSERT_EQ(run("plan", with_config(config_)), kExitOk) << err_.str();
  CommandOptions options = with_config(config_);
  options.trajectory = dir_ / "out" / "trajectory.csv";
  EXPECT_EQ(run("ik", options), kExitKinematics);
  EXPECT_NE(err_.str().find("sample 0"), std::string::npos) << err_.str();
}

TEST_F(Cli, ConstantPoseGivesConstantJoints) {
  const fs::path csv = dir_ / "constant.csv";
  {
    std::ofstream out(csv);
    out << "time_s,x_m,y_m,z_m,qw,qx,qy,qz,imaging_flag\n";
    for (int i = 0; i < 10; ++i) out << i / 12.0 << ",0,0.5,0.3,1,0,0,0,1\n";
  }
  CommandOptions options = with_config(config_);
  options.trajectory = csv;
  ASSERT_EQ(run("ik", options), kExitOk) << err_.str();
  std::ifstream in(dir_ / "out" / "joints.csv");
  const JointTrajectory joints = read_joint_csv(in);
  for (const JointSample& s : joints.samples) EXPECT_EQ(s.joints, joints.samples[0].joints);
}

TEST_F(Cli, SeedJointsParsing) {
  EXPECT_EQ(parse_joint_list("0,1,2,3,4,5")[5], 5.0);
  EXPECT_THROW(parse_joint_list("1,2"), ConfigError);
  EXPECT_THROW(parse_joint_list("1,2,3,4,5,x"), ConfigError);
  EXPECT_THROW(parse_joint_list("1,2,3,4,5,6,7"), ConfigError);
}

TEST_F(Cli, EndToEndVerifyPasses) {
  ASSERT_EQ(run("plan", with_config(config_)), kExitOk);
  CommandOptions options = with_config(config_);
  options.trajectory = dir_ / "out" / "trajectory.csv";
  ASSERT_EQ(run("simulate", options), kExitOk) << err_.str();
  options.echoes = dir_ / "out" / "echoes.bin";
  ASSERT_EQ(run("image", options), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "out" / "image.pgm"));
  const Json sidecar = Json::parse(slurp(dir_ / "out" / "image.json"));
  EXPECT_EQ(sidecar["schema_version"], 1);
  EXPECT_EQ(sidecar["pulse_count"], 73);

  const Json expect = Json::parse(R"({"schema_version": 1, "peaks": [{"position": [0, 1, 0.3],
      "width_x": {"min": 0.042942, "max": 0.080516}, "width_range": {"min": 0.029979, "max": 0.048716}}]})");
  CommandOptions verify;
  verify.image = dir_ / "out" / "image.bin";
  verify.expect = write_config(expect, "expect.json");
  EXPECT_EQ(run("verify", verify), kExitOk) << out_.str();
  EXPECT_TRUE(Json::parse(out_.str())["passed"].get<bool>());

  const Json impossible = Json::parse(R"({"peaks": [{"position": [0, 1, 0.3], "width_x": {"max": 0.001}}]})");
  verify.expect = write_config(impossible, "impossible.json");
  EXPECT_EQ(run("verify", verify), kExitVerifyFailed);
}

TEST_F(Cli, PairVerifyReportsResolvability) {
  config_["scene"]["scatterers"] =
      Json::parse(R"([{"position": [-0.025, 1, 0.3]}, {"position": [0.025, 1, 0.3]}])");
  ASSERT_EQ(run("plan", with_config(config_)), kExitOk);
  CommandOptions options = with_config(config_);
  options.trajectory = dir_ / "out" / "trajectory.csv";
  ASSERT_EQ(run("simulate", options), kExitOk);
  options.echoes = dir_ / "out" / "echoes.bin";
  ASSERT_EQ(run("image", options), kExitOk);

  CommandOptions verify;
  verify.image = dir_ / "out" / "image.bin";
  verify.expect = write_config(
      Json::parse(R"({"pairs": [{"a": [-0.025, 1, 0.3], "b": [0.025, 1, 0.3], "resolved": true}]})"), "pair.json");
  verify.out = dir_ / "verify";
  const int code = run("verify", verify);
  const Json report = Json::parse(out_.str());
  const Json& check = report["checks"][0];
  EXPECT_EQ(check["name"], "pairs[0].resolved");
  EXPECT_TRUE(check.contains("dip_depth_db"));
  EXPECT_EQ(code == kExitOk, check["value"].get<bool>());
  EXPECT_TRUE(fs::exists(dir_ / "verify" / "verify.json"));
}

TEST_F(Cli, CorruptEchoMagicExitsFive) {
  const fs::path bad = dir_ / "bad.bin";
  std::ofstream(bad, std::ios::binary) << "XXXX\x01\x00\x00\x00";
  CommandOptions options = with_config(config_);
  options.echoes = bad;
  EXPECT_EQ(run("image", options), kExitFormat);
  EXPECT_NE(err_.str().find("magic"), std::string::npos);
  options.echoes = dir_ / "missing.bin";
  EXPECT_EQ(run("image", options), kExitFormat);
}

TEST_F(Cli, ThreadBudgetFromEnvironment) {
  ::setenv("SARPLAN_THREADS", "1", 1);
  EXPECT_EQ(thread_budget(), 1u);
  ::setenv("SARPLAN_THREADS", "zero", 1);
  EXPECT_THROW(thread_budget(), ConfigError);
  ::unsetenv("SARPLAN_THREADS");
  EXPECT_GE(thread_budget(), 1u);
}

TEST_F(Cli, ArmModelJsonRoundTrip) {
  const ArmModel arm = default_arm_model();
  const ArmModel back = parse_arm_model(arm_model_json(arm));
  EXPECT_EQ(back.name, arm.name);
  EXPECT_TRUE(back.tool_transform.isApprox(arm.tool_transform, 0.0));
  for (std::size_t i = 0; i < kJointCount; ++i) {
    EXPECT_EQ(back.dh_rows[i].link_length, arm.dh_rows[i].link_length);
    EXPECT_EQ(back.joint_limits[i].max, arm.joint_limits[i].max);
  }
  Json broken = arm_model_json(arm);
  broken["joint_limits"][3] = Json::array({1.0, -1.0});
  EXPECT_THROW(parse_arm_model(broken), ConfigError);
  broken = arm_model_json(arm);
  broken["tool_transform"][0] = 2.0;
  EXPECT_THROW(parse_arm_model(broken), ConfigError);
}
