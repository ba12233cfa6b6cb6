#pragma once

// Command implementations behind the `sarplan` executable. Each stage reads
// and writes files so it can be rerun in isolation; outputs are byte-stable
// for identical inputs.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>

#include "sarplan/config.hpp"
#include "sarplan/errors.hpp"
#include "sarplan/kinematics.hpp"
#include "sarplan/radar_constraints.hpp"
#include "sarplan/simulator.hpp"
#include "sarplan/trajectory.hpp"

namespace sarplan {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitConfig = 2,
  kExitPlan = 3,
  kExitKinematics = 4,
  kExitFormat = 5,
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> trajectory;
  std::optional<std::filesystem::path> echoes;
  std::optional<std::filesystem::path> image;
  std::optional<std::filesystem::path> expect;
  std::optional<ScanMode> mode;
  std::optional<Window> window;
  std::optional<JointVector> seed_joints;
  std::optional<double> velocity;
};

/// Worker count for back-projection: hardware concurrency, capped by the
/// SARPLAN_THREADS environment variable when set.
inline unsigned thread_budget() {
  const unsigned hardware = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("SARPLAN_THREADS");
  if (!env || !*env) return hardware;
  char* end = nullptr;
  const long value = std::strtol(env, &end, 10);
  if (*end != '\0' || value < 1) throw ConfigError("SARPLAN_THREADS", "must be a positive integer");
  return std::min(hardware, static_cast<unsigned>(std::min<long>(value, 1 << 16)));
}

/// Parses "q1,q2,...,q6" (radians).
inline JointVector parse_joint_list(std::string_view text) {
  JointVector q;
  std::size_t index = 0;
  std::string item;
  std::stringstream stream{std::string(text)};
  while (std::getline(stream, item, ',')) {
    if (index >= kJointCount) throw ConfigError("--seed-joints", "expected exactly 6 comma-separated values");
    char* end = nullptr;
    const double value = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || !std::isfinite(value)) {
      throw ConfigError("--seed-joints", "\"" + item + "\" is not a number");
    }
    q[static_cast<Eigen::Index>(index++)] = value;
  }
  if (index != kJointCount) throw ConfigError("--seed-joints", "expected exactly 6 comma-separated values");
  return q;
}

namespace detail {

inline const std::filesystem::path& require_path(const std::optional<std::filesystem::path>& path, const char* flag) {
  if (!path) throw ConfigError(flag, "option is required for this command");
  return *path;
}

inline RunConfig load_config(const CommandOptions& options) {
  RunConfig config = load_run_config(require_path(options.config, "--config"));
  if (options.mode) config.mode = *options.mode;
  if (options.window) config.window = *options.window;
  if (options.velocity) {
    if (!(*options.velocity > 0.0)) throw ConfigError("--velocity", "must be > 0");
    config.cruise_velocity = *options.velocity;
  }
  if (options.out) config.output_dir = *options.out;
  return config;
}

inline std::filesystem::path output_file(const RunConfig& config, const char* name) {
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw FormatError("cannot create output directory " + config.output_dir.string() + ": " + ec.message());
  return config.output_dir / name;
}

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                       bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw FormatError("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& json) {
  write_file(path, [&](std::ostream& out) { out << json.dump(2) << '\n'; });
}

inline std::ifstream open_input(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

inline PoseTrajectory load_trajectory(const std::filesystem::path& path, ScanMode mode) {
  std::ifstream in = open_input(path);
  return read_trajectory_csv(in, mode);
}

/// Largest |dx| between consecutive imaging samples of the same slice.
inline double max_imaging_spacing(const PoseTrajectory& trajectory) {
  double spacing = 0.0;
  for (std::size_t i = 1; i < trajectory.samples.size(); ++i) {
    const PoseSample& a = trajectory.samples[i - 1];
    const PoseSample& b = trajectory.samples[i];
    if (a.imaging && b.imaging) spacing = std::max(spacing, std::abs(b.position.x() - a.position.x()));
  }
  return spacing;
}

inline Json violation_json(const TrajectoryViolation& v) {
  return {{"index", v.index}, {"quantity", v.quantity}, {"limit", v.limit}, {"actual", v.actual}};
}

inline Json optional_json(const std::optional<double>& value) { return value ? Json(*value) : Json(nullptr); }

/// JSON cannot carry infinities; a missing sidelobe is written as null.
inline Json finite_or_null(double value) { return std::isfinite(value) ? Json(value) : Json(nullptr); }

}  // namespace detail

inline int cmd_constraints(const CommandOptions& options, std::ostream& out, std::ostream&) {
  const RunConfig config = detail::load_config(options);
  const Json report = report_json(build_report(config.radar, config.scene));
  out << report.dump(2) << '\n';
  if (options.out) detail::write_json(detail::output_file(config, "constraints.json"), report);
  return kExitOk;
}

inline int cmd_plan(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const RunConfig config = detail::load_config(options);
  const ConstraintReport report = build_report(config.radar, config.scene);
  const PlanOptions plan_options = config.plan_options();
  const PoseTrajectory trajectory = config.mode == ScanMode::stripmap
                                        ? plan_stripmap(report, config.radar, config.scene, plan_options)
                                        : plan_spotlight(report, config.radar, config.scene, plan_options);
  const auto violations = validate_trajectory(trajectory, report);
  const double cruise = config.cruise_velocity.value_or(default_cruise_velocity(report.max_velocity));
  const VelocityProfile segment = trapezoid_profile(report.aperture_length_x, cruise, config.accel_duration);

  Json listing = Json::array();
  for (const auto& v : violations) listing.push_back(detail::violation_json(v));
  const Json summary = {{"schema_version", kSchemaVersion},
                        {"mode", std::string(to_string(trajectory.mode))},
                        {"cruise_velocity", cruise},
                        {"accel_duration", config.accel_duration},
                        {"segment_duration", segment.total_duration},
                        {"slice_count", trajectory.slice_heights.size()},
                        {"slice_pitch", report.sampling_spacing_y},
                        {"sample_count", trajectory.samples.size()},
                        {"imaging_count", trajectory.imaging_count()},
                        {"total_duration", trajectory.samples.empty() ? 0.0 : trajectory.samples.back().time},
                        {"max_imaging_spacing", detail::max_imaging_spacing(trajectory)},
                        {"constraints", report_json(report)},
                        {"violations", listing}};

  detail::write_file(detail::output_file(config, "trajectory.csv"),
                     [&](std::ostream& csv) { write_trajectory_csv(csv, trajectory); });
  detail::write_json(detail::output_file(config, "plan.json"), summary);
  out << "planned " << trajectory.samples.size() << " samples (" << trajectory.imaging_count() << " imaging) over "
      << trajectory.slice_heights.size() << " slices -> " << config.output_dir.string() << '\n';
  if (!violations.empty()) {
    err << "trajectory violates acquisition constraints (" << violations.size() << " violations):\n";
    const std::size_t shown = std::min<std::size_t>(violations.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
      const auto& v = violations[i];
      err << "  sample " << v.index << ": " << v.quantity << " " << v.actual << " > limit " << v.limit << '\n';
    }
    if (shown < violations.size()) err << "  ... " << violations.size() - shown << " more in plan.json\n";
    return kExitPlan;
  }
  return kExitOk;
}

inline int cmd_ik(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const RunConfig config = detail::load_config(options);
  const PoseTrajectory trajectory =
      detail::load_trajectory(detail::require_path(options.trajectory, "--trajectory"), config.mode);
  if (trajectory.samples.empty()) throw FormatError("trajectory file has no samples");

  const auto workspace = check_workspace(config.arm, trajectory, config.keepout_boxes);
  if (!workspace.empty()) {
    const auto& first = workspace.front();
    const Eigen::Vector3d& p = trajectory.samples[first.index].position;
    err << "workspace check failed at sample " << first.index << " (position " << p.x() << ' ' << p.y() << ' '
        << p.z() << "): " << (first.reason == "reach" ? "outside the reach annulus" : "inside a keep-out box")
        << "; " << workspace.size() << " violations in total\n";
    return kExitKinematics;
  }

  const JointVector seed = options.seed_joints.value_or(config.arm.home);
  const JointTrajectory joints = solve_trajectory(config.arm, trajectory, seed);

  double max_step = 0.0;
  double max_rate = 0.0;
  double min_manipulability = std::numeric_limits<double>::infinity();
  bool within_limits = true;
  for (std::size_t i = 0; i < joints.samples.size(); ++i) {
    const JointVector& q = joints.samples[i].joints;
    within_limits = within_limits && config.arm.within_limits(q);
    min_manipulability = std::min(min_manipulability, manipulability(geometric_jacobian(config.arm, q)));
    if (i == 0) continue;
    const double step = (q - joints.samples[i - 1].joints).cwiseAbs().maxCoeff();
    max_step = std::max(max_step, step);
    max_rate = std::max(max_rate, step / (joints.samples[i].time - joints.samples[i - 1].time));
  }
  detail::write_file(detail::output_file(config, "joints.csv"), [&](std::ostream& csv) { write_joint_csv(csv, joints); });
  detail::write_json(detail::output_file(config, "ik.json"),
                     {{"schema_version", kSchemaVersion},
                      {"arm", config.arm.name},
                      {"sample_count", joints.samples.size()},
                      {"within_limits", within_limits},
                      {"max_joint_step", max_step},
                      {"max_joint_rate", max_rate},
                      {"min_manipulability", min_manipulability}});
  out << "solved " << joints.samples.size() << " samples on arm '" << config.arm.name << "' (max joint step "
      << max_step << " rad) -> " << config.output_dir.string() << '\n';
  return kExitOk;
}

inline int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream&) {
  const RunConfig config = detail::load_config(options);
  const PoseTrajectory trajectory =
      detail::load_trajectory(detail::require_path(options.trajectory, "--trajectory"), config.mode);
  const EchoSet echoes = synthesize_echoes(config.scene, trajectory, config.radar, config.simulation.n_freqs);
  detail::write_file(detail::output_file(config, "echoes.bin"), [&](std::ostream& bin) { write_echoes(bin, echoes); },
                     true);
  out << "synthesized " << echoes.pulse_count() << " pulses x " << echoes.frequency_count() << " frequencies from "
      << config.scene.scatterers.size() << " scatterers -> " << config.output_dir.string() << '\n';
  return kExitOk;
}

inline int cmd_image(const CommandOptions& options, std::ostream& out, std::ostream&) {
  const RunConfig config = detail::load_config(options);
  std::ifstream in = detail::open_input(detail::require_path(options.echoes, "--echoes"), true);
  const EchoSet echoes = read_echoes(in);
  const SarImage image = backproject(echoes, config.image_grid(), {config.window, thread_budget()});

  detail::write_file(detail::output_file(config, "image.pgm"), [&](std::ostream& pgm) { write_pgm(pgm, image); });
  detail::write_file(detail::output_file(config, "image.bin"), [&](std::ostream& bin) { write_image(bin, image); },
                     true);
  detail::write_json(detail::output_file(config, "image.json"), image_sidecar_json(image, config));
  out << "imaged " << image.grid.counts[0] << "x" << image.grid.counts[1] << "x" << image.grid.counts[2]
      << " grid with " << to_string(image.metadata.window) << " window -> " << config.output_dir.string() << '\n';
  return kExitOk;
}

namespace detail {

struct Bound {
  std::optional<double> min;
  std::optional<double> max;
};

inline Bound bound_at(const Json& object, const std::string& parent, const std::string& key) {
  Bound bound;
  const Json* node = find(object, key);
  if (!node) return bound;
  const std::string path = join_path(parent, key);
  require_object(*node, path);
  bound.min = optional_number(*node, path, "min");
  bound.max = optional_number(*node, path, "max");
  return bound;
}

}  // namespace detail

/// Checks a formed image against an expectations document:
///   {"peaks": [{"position": [x,y,z], "width_x": {"min","max"}, "width_range": {...},
///               "width_y": {...}, "peak_sidelobe_ratio": {...}}],
///    "pairs": [{"a": [x,y,z], "b": [x,y,z], "resolved": true|false}]}
inline int cmd_verify(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const std::filesystem::path image_path = detail::require_path(options.image, "--image");
  const Json expectations = read_json_file(detail::require_path(options.expect, "--expect"));
  detail::require_object(expectations, "");
  detail::check_schema_version(expectations);

  std::ifstream in = detail::open_input(image_path, true);
  SarImage image = read_image(in);
  std::filesystem::path sidecar_path = image_path;
  sidecar_path.replace_extension(".json");
  apply_sidecar(image, read_json_file(sidecar_path));

  Json checks = Json::array();
  bool passed = true;
  auto record = [&](Json check) {
    passed = passed && check["passed"].get<bool>();
    checks.push_back(std::move(check));
  };
  auto check_bound = [&](const std::string& name, const std::optional<double>& value, const detail::Bound& bound) {
    if (!bound.min && !bound.max) return;
    const bool ok = value && (!bound.min || *value >= *bound.min) && (!bound.max || *value <= *bound.max);
    record({{"name", name},
            {"value", value ? detail::finite_or_null(*value) : Json(nullptr)},
            {"min", detail::optional_json(bound.min)},
            {"max", detail::optional_json(bound.max)},
            {"passed", ok}});
  };

  if (const Json* peaks = detail::find(expectations, "peaks")) {
    if (!peaks->is_array()) throw ConfigError("peaks", "expected an array");
    for (std::size_t i = 0; i < peaks->size(); ++i) {
      const std::string path = "peaks[" + std::to_string(i) + "]";
      const Json& peak = detail::require_object((*peaks)[i], path);
      const Json* position = detail::find(peak, "position");
      if (!position) throw ConfigError(path + ".position", "required field is missing");
      const Eigen::Vector3d expected = detail::vector_at(*position, path + ".position");
      const auto width_x = detail::bound_at(peak, path, "width_x");
      const auto width_y = detail::bound_at(peak, path, "width_y");
      const auto width_range = detail::bound_at(peak, path, "width_range");
      const auto pslr = detail::bound_at(peak, path, "peak_sidelobe_ratio");
      try {
        const ResolutionMeasurement m = measure_resolution(image, expected);
        record({{"name", path + ".peak_position"},
                {"value", detail::vector_json(m.peak_position)},
                {"passed", true}});
        check_bound(path + ".width_x", m.width_x, width_x);
        check_bound(path + ".width_y", m.width_y, width_y);
        check_bound(path + ".width_range", m.width_range, width_range);
        check_bound(path + ".peak_sidelobe_ratio", m.peak_sidelobe_ratio, pslr);
      } catch (const MeasurementError& e) {
        record({{"name", path}, {"error", e.what()}, {"passed", false}});
      }
    }
  }

  if (const Json* pairs = detail::find(expectations, "pairs")) {
    if (!pairs->is_array()) throw ConfigError("pairs", "expected an array");
    for (std::size_t i = 0; i < pairs->size(); ++i) {
      const std::string path = "pairs[" + std::to_string(i) + "]";
      const Json& pair = detail::require_object((*pairs)[i], path);
      const Json* a = detail::find(pair, "a");
      const Json* b = detail::find(pair, "b");
      const Json* resolved = detail::find(pair, "resolved");
      if (!a || !b) throw ConfigError(path, "requires \"a\" and \"b\"");
      if (!resolved || !resolved->is_boolean()) throw ConfigError(path + ".resolved", "expected a boolean");
      try {
        const Resolvability r =
            resolvability_check(image, detail::vector_at(*a, path + ".a"), detail::vector_at(*b, path + ".b"));
        record({{"name", path + ".resolved"},
                {"value", r.resolved},
                {"expected", resolved->get<bool>()},
                {"dip_depth_db", detail::finite_or_null(r.dip_depth)},
                {"passed", r.resolved == resolved->get<bool>()}});
      } catch (const MeasurementError& e) {
        record({{"name", path}, {"error", e.what()}, {"passed", false}});
      }
    }
  }

  const Json report = {{"schema_version", kSchemaVersion}, {"passed", passed}, {"checks", checks}};
  out << report.dump(2) << '\n';
  if (options.out) {
    std::error_code ec;
    std::filesystem::create_directories(*options.out, ec);
    if (ec) throw FormatError("cannot create output directory " + options.out->string());
    detail::write_json(*options.out / "verify.json", report);
  }
  if (!passed) err << "verification failed\n";
  return passed ? kExitOk : kExitVerifyFailed;
}

/// Runs `command`, mapping failures onto the documented exit codes.
inline int run_command(std::string_view command, const CommandOptions& options, std::ostream& out, std::ostream& err) {
  try {
    if (command == "constraints") return cmd_constraints(options, out, err);
    if (command == "plan") return cmd_plan(options, out, err);
    if (command == "ik") return cmd_ik(options, out, err);
    if (command == "simulate") return cmd_simulate(options, out, err);
    if (command == "image") return cmd_image(options, out, err);
    if (command == "verify") return cmd_verify(options, out, err);
    err << "error: unknown command '" << command << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const PlanError& e) {
    err << "plan error: " << e.what() << '\n';
    return kExitPlan;
  } catch (const KinematicsError& e) {
    err << "kinematics error: " << e.what() << '\n';
    return kExitKinematics;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const SimulationError& e) {
    err << "simulation error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace sarplan
