#pragma once

// JSON run configuration, arm model documents and report serialisation.
// Every rejected value raises ConfigError naming its dotted field path.

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "sarplan/errors.hpp"
#include "sarplan/kinematics.hpp"
#include "sarplan/radar_constraints.hpp"
#include "sarplan/simulator.hpp"
#include "sarplan/trajectory.hpp"

namespace sarplan {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct SimulationSettings {
  std::size_t n_freqs = 128;
  /// Image grid center; defaults to the scene center.
  std::optional<Eigen::Vector3d> grid_center;
  Eigen::Vector3d grid_spacing = Eigen::Vector3d::Constant(0.005);
  std::array<std::size_t, 3> grid_counts{200, 200, 1};
};

struct RunConfig {
  RadarSpec radar;
  SceneSpec scene;
  ScanMode mode = ScanMode::stripmap;
  double accel_duration = 2.0;
  Window window = Window::rectangular;
  std::filesystem::path output_dir = "out";
  std::optional<double> cruise_velocity;
  std::optional<std::size_t> max_slices;
  SimulationSettings simulation;
  ArmModel arm = default_arm_model();
  std::vector<AlignedBox> keepout_boxes;

  PlanOptions plan_options() const { return {accel_duration, cruise_velocity, max_slices}; }

  ImageGrid image_grid() const {
    return ImageGrid::centered(simulation.grid_center.value_or(scene.center), simulation.grid_spacing,
                               simulation.grid_counts);
  }
};

namespace detail {

inline std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline const Json& require_object(const Json& node, const std::string& path) {
  if (!node.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  return node;
}

inline const Json* find(const Json& object, const std::string& key) {
  const auto it = object.find(key);
  return it == object.end() ? nullptr : &*it;
}

inline double number_at(const Json& value, const std::string& path) {
  if (!value.is_number()) throw ConfigError(path, "expected a number");
  const double number = value.get<double>();
  if (!std::isfinite(number)) throw ConfigError(path, "must be finite");
  return number;
}

inline double required_number(const Json& object, const std::string& parent, const std::string& key) {
  const std::string path = join_path(parent, key);
  const Json* value = find(object, key);
  if (!value) throw ConfigError(path, "required field is missing");
  return number_at(*value, path);
}

inline std::optional<double> optional_number(const Json& object, const std::string& parent, const std::string& key) {
  const Json* value = find(object, key);
  if (!value || value->is_null()) return std::nullopt;
  return number_at(*value, join_path(parent, key));
}

inline std::size_t count_at(const Json& value, const std::string& path) {
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  return static_cast<std::size_t>(value.get<long long>());
}

inline Eigen::Vector3d vector_at(const Json& value, const std::string& path) {
  if (!value.is_array() || value.size() != 3) throw ConfigError(path, "expected an array of 3 numbers");
  Eigen::Vector3d v;
  for (std::size_t i = 0; i < 3; ++i) v[static_cast<Eigen::Index>(i)] = number_at(value[i], path + "[" + std::to_string(i) + "]");
  return v;
}

inline std::string string_at(const Json& value, const std::string& path) {
  if (!value.is_string()) throw ConfigError(path, "expected a string");
  return value.get<std::string>();
}

/// Runs a domain validator and re-labels its failure with `path`.
template <typename F>
void check_domain(const std::string& path, F&& validate) {
  try {
    validate();
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
}

inline Json vector_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

inline RadarSpec parse_radar(const Json& node, const std::string& path = "radar") {
  detail::require_object(node, path);
  RadarSpec radar;
  radar.center_frequency = detail::required_number(node, path, "center_frequency");
  radar.bandwidth = detail::required_number(node, path, "bandwidth");
  radar.prf = detail::required_number(node, path, "prf");
  radar.beamwidth_x = deg_to_rad(detail::required_number(node, path, "beamwidth_x_deg"));
  radar.beamwidth_y = deg_to_rad(detail::required_number(node, path, "beamwidth_y_deg"));
  if (auto offset = detail::optional_number(node, path, "tx_rx_offset")) radar.tx_rx_offset = *offset;

  // Field-specific checks first so the message names the offending key.
  auto positive = [&](double value, const char* key) {
    if (!(value > 0.0)) throw ConfigError(detail::join_path(path, key), "must be > 0");
  };
  positive(radar.bandwidth, "bandwidth");
  positive(radar.center_frequency, "center_frequency");
  positive(radar.prf, "prf");
  if (!(radar.beamwidth_x > 0.0 && radar.beamwidth_x < std::numbers::pi)) {
    throw ConfigError(path + ".beamwidth_x_deg", "must lie in (0, 180) degrees");
  }
  if (!(radar.beamwidth_y > 0.0 && radar.beamwidth_y < std::numbers::pi)) {
    throw ConfigError(path + ".beamwidth_y_deg", "must lie in (0, 180) degrees");
  }
  if (!(radar.tx_rx_offset >= 0.0)) throw ConfigError(path + ".tx_rx_offset", "must be >= 0");
  detail::check_domain(path + ".center_frequency", [&] { radar.validate(); });
  return radar;
}

inline SceneSpec parse_scene(const Json& node, const std::string& path = "scene") {
  detail::require_object(node, path);
  SceneSpec scene;
  scene.target_dx = detail::required_number(node, path, "target_dx");
  scene.target_dy = detail::required_number(node, path, "target_dy");
  scene.standoff_range = detail::required_number(node, path, "standoff_range");
  if (auto er = detail::optional_number(node, path, "relative_permittivity")) scene.relative_permittivity = *er;
  if (const Json* center = detail::find(node, "center")) scene.center = detail::vector_at(*center, path + ".center");
  scene.aperture_length_x = detail::optional_number(node, path, "aperture_length_x");
  scene.aperture_length_y = detail::optional_number(node, path, "aperture_length_y");

  for (const auto& [key, value] : {std::pair{"target_dx", scene.target_dx}, std::pair{"target_dy", scene.target_dy},
                                   std::pair{"standoff_range", scene.standoff_range}}) {
    if (!(value > 0.0)) throw ConfigError(detail::join_path(path, key), "must be > 0");
  }
  if (!(scene.relative_permittivity >= 1.0)) throw ConfigError(path + ".relative_permittivity", "must be >= 1");
  for (const auto& [key, value] : {std::pair{"aperture_length_x", scene.aperture_length_x},
                                   std::pair{"aperture_length_y", scene.aperture_length_y}}) {
    if (value && !(*value > 0.0)) throw ConfigError(detail::join_path(path, key), "must be > 0");
  }

  if (const Json* list = detail::find(node, "scatterers")) {
    const std::string list_path = path + ".scatterers";
    if (!list->is_array()) throw ConfigError(list_path, "expected an array");
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string item = list_path + "[" + std::to_string(i) + "]";
      const Json& entry = detail::require_object((*list)[i], item);
      Scatterer scatterer;
      const Json* position = detail::find(entry, "position");
      if (!position) throw ConfigError(item + ".position", "required field is missing");
      scatterer.position = detail::vector_at(*position, item + ".position");
      if (auto r = detail::optional_number(entry, item, "reflectivity")) scatterer.reflectivity = *r;
      scene.scatterers.push_back(scatterer);
    }
  }
  return scene;
}

inline ArmModel parse_arm_model(const Json& node, const std::string& path = "arm") {
  detail::require_object(node, path);
  ArmModel model;
  model.name = "custom";
  if (const Json* name = detail::find(node, "name")) model.name = detail::string_at(*name, path + ".name");

  const Json* rows = detail::find(node, "dh");
  if (!rows) throw ConfigError(path + ".dh", "required field is missing");
  if (!rows->is_array() || rows->size() != kJointCount) {
    throw ConfigError(path + ".dh", "expected an array of " + std::to_string(kJointCount) + " rows");
  }
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const std::string row_path = path + ".dh[" + std::to_string(i) + "]";
    const Json& row = detail::require_object((*rows)[i], row_path);
    model.dh_rows[i].link_twist = detail::required_number(row, row_path, "alpha");
    model.dh_rows[i].link_length = detail::required_number(row, row_path, "a");
    model.dh_rows[i].link_offset = detail::required_number(row, row_path, "d");
    model.dh_rows[i].joint_angle_offset = detail::optional_number(row, row_path, "theta_offset").value_or(0.0);
  }

  const Json* limits = detail::find(node, "joint_limits");
  if (!limits) throw ConfigError(path + ".joint_limits", "required field is missing");
  if (!limits->is_array() || limits->size() != kJointCount) {
    throw ConfigError(path + ".joint_limits", "expected " + std::to_string(kJointCount) + " [min, max] pairs");
  }
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const std::string limit_path = path + ".joint_limits[" + std::to_string(i) + "]";
    const Json& pair = (*limits)[i];
    if (!pair.is_array() || pair.size() != 2) throw ConfigError(limit_path, "expected [min, max]");
    model.joint_limits[i] = {detail::number_at(pair[0], limit_path + "[0]"), detail::number_at(pair[1], limit_path + "[1]")};
    if (!(model.joint_limits[i].min < model.joint_limits[i].max)) throw ConfigError(limit_path, "min must be < max");
  }

  if (const Json* tool = detail::find(node, "tool_transform")) {
    const std::string tool_path = path + ".tool_transform";
    if (!tool->is_array() || tool->size() != 16) throw ConfigError(tool_path, "expected 16 numbers (4x4 row-major)");
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        m(r, c) = detail::number_at((*tool)[static_cast<std::size_t>(4 * r + c)], tool_path);
      }
    }
    if (!m.row(3).isApprox(Eigen::RowVector4d(0, 0, 0, 1), 1e-12)) {
      throw ConfigError(tool_path, "bottom row must be [0, 0, 0, 1]");
    }
    model.tool_transform.matrix() = m;
  }
  if (auto rate = detail::optional_number(node, path, "joint_rate_limit")) {
    if (!(*rate > 0.0)) throw ConfigError(path + ".joint_rate_limit", "must be > 0");
    model.joint_rate_limit = *rate;
  }
  model.min_reach = detail::optional_number(node, path, "min_reach").value_or(0.0);
  model.max_reach = detail::optional_number(node, path, "max_reach").value_or(model.chain_length());
  if (const Json* home = detail::find(node, "home")) {
    if (!home->is_array() || home->size() != kJointCount) throw ConfigError(path + ".home", "expected 6 numbers");
    for (std::size_t i = 0; i < kJointCount; ++i) {
      model.home[static_cast<Eigen::Index>(i)] = detail::number_at((*home)[i], path + ".home");
    }
  } else {
    model.home = model.clamp(JointVector::Zero());
  }
  try {
    model.validate();
  } catch (const KinematicsError& e) {
    throw ConfigError(path, e.what());
  }
  return model;
}

inline Json arm_model_json(const ArmModel& model) {
  Json rows = Json::array();
  for (const DhRow& row : model.dh_rows) {
    rows.push_back({{"alpha", row.link_twist}, {"a", row.link_length}, {"d", row.link_offset},
                    {"theta_offset", row.joint_angle_offset}});
  }
  Json limits = Json::array();
  for (const JointLimit& limit : model.joint_limits) limits.push_back(Json::array({limit.min, limit.max}));
  Json tool = Json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) tool.push_back(model.tool_transform.matrix()(r, c));
  }
  Json home = Json::array();
  for (double q : model.home) home.push_back(q);
  return {{"schema_version", kSchemaVersion}, {"name", model.name},          {"dh", rows},
          {"joint_limits", limits},          {"tool_transform", tool},       {"joint_rate_limit", model.joint_rate_limit},
          {"min_reach", model.min_reach},    {"max_reach", model.max_reach}, {"home", home}};
}

namespace detail {

inline void check_schema_version(const Json& root) {
  if (const Json* version = find(root, "schema_version")) {
    if (!version->is_number_integer() || version->get<int>() != kSchemaVersion) {
      throw ConfigError("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const Json& root) {
  detail::require_object(root, "");
  detail::check_schema_version(root);
  RunConfig config;
  const Json* radar = detail::find(root, "radar");
  if (!radar) throw ConfigError("radar", "required section is missing");
  config.radar = parse_radar(*radar);
  const Json* scene = detail::find(root, "scene");
  if (!scene) throw ConfigError("scene", "required section is missing");
  config.scene = parse_scene(*scene);

  if (const Json* mode = detail::find(root, "mode")) {
    const auto parsed = parse_scan_mode(detail::string_at(*mode, "mode"));
    if (!parsed) throw ConfigError("mode", "expected \"stripmap\" or \"spotlight\"");
    config.mode = *parsed;
  }
  if (auto t = detail::optional_number(root, "", "accel_duration")) {
    if (!(*t > 0.0)) throw ConfigError("accel_duration", "must be > 0");
    config.accel_duration = *t;
  }
  if (const Json* window = detail::find(root, "window")) {
    const auto parsed = parse_window(detail::string_at(*window, "window"));
    if (!parsed) throw ConfigError("window", "expected \"rect\" or \"hann\"");
    config.window = *parsed;
  }
  if (const Json* dir = detail::find(root, "output_dir")) config.output_dir = detail::string_at(*dir, "output_dir");

  if (const Json* plan = detail::find(root, "plan")) {
    detail::require_object(*plan, "plan");
    config.cruise_velocity = detail::optional_number(*plan, "plan", "cruise_velocity");
    if (config.cruise_velocity && !(*config.cruise_velocity > 0.0)) {
      throw ConfigError("plan.cruise_velocity", "must be > 0");
    }
    if (const Json* slices = detail::find(*plan, "max_slices")) {
      config.max_slices = detail::count_at(*slices, "plan.max_slices");
      if (*config.max_slices == 0) throw ConfigError("plan.max_slices", "must be >= 1");
    }
  }

  if (const Json* sim = detail::find(root, "simulation")) {
    detail::require_object(*sim, "simulation");
    if (const Json* n = detail::find(*sim, "n_freqs")) {
      config.simulation.n_freqs = detail::count_at(*n, "simulation.n_freqs");
      if (config.simulation.n_freqs < 2) throw ConfigError("simulation.n_freqs", "must be >= 2");
    }
    if (const Json* grid = detail::find(*sim, "grid")) {
      detail::require_object(*grid, "simulation.grid");
      if (const Json* c = detail::find(*grid, "center")) {
        config.simulation.grid_center = detail::vector_at(*c, "simulation.grid.center");
      }
      if (const Json* s = detail::find(*grid, "spacing")) {
        config.simulation.grid_spacing = detail::vector_at(*s, "simulation.grid.spacing");
        if (!(config.simulation.grid_spacing.array() > 0.0).all()) {
          throw ConfigError("simulation.grid.spacing", "every component must be > 0");
        }
      }
      if (const Json* counts = detail::find(*grid, "counts")) {
        if (!counts->is_array() || counts->size() != 3) {
          throw ConfigError("simulation.grid.counts", "expected an array of 3 integers");
        }
        for (std::size_t a = 0; a < 3; ++a) {
          const std::string axis_path = "simulation.grid.counts[" + std::to_string(a) + "]";
          config.simulation.grid_counts[a] = detail::count_at((*counts)[a], axis_path);
          if (config.simulation.grid_counts[a] == 0) throw ConfigError(axis_path, "must be >= 1");
        }
      }
    }
  }

  if (const Json* arm = detail::find(root, "arm")) config.arm = parse_arm_model(*arm);

  if (const Json* workspace = detail::find(root, "workspace")) {
    detail::require_object(*workspace, "workspace");
    if (const Json* boxes = detail::find(*workspace, "keepout_boxes")) {
      if (!boxes->is_array()) throw ConfigError("workspace.keepout_boxes", "expected an array");
      for (std::size_t i = 0; i < boxes->size(); ++i) {
        const std::string box_path = "workspace.keepout_boxes[" + std::to_string(i) + "]";
        const Json& box = detail::require_object((*boxes)[i], box_path);
        const Json* lo = detail::find(box, "min");
        const Json* hi = detail::find(box, "max");
        if (!lo || !hi) throw ConfigError(box_path, "requires \"min\" and \"max\"");
        config.keepout_boxes.push_back({detail::vector_at(*lo, box_path + ".min"), detail::vector_at(*hi, box_path + ".max")});
      }
    }
  }
  return config;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const Json root = read_json_file(path);
  try {
    return parse_run_config(root);
  } catch (const Json::exception& e) {
    throw ConfigError("<root>", e.what());
  }
}

inline Json report_json(const ConstraintReport& report) {
  return {{"schema_version", kSchemaVersion},
          {"range_resolution", report.range_resolution},
          {"cross_range_resolution_x", report.cross_range_resolution_x},
          {"cross_range_resolution_y", report.cross_range_resolution_y},
          {"scan_margin_x", report.scan_margin_x},
          {"scan_margin_y", report.scan_margin_y},
          {"aperture_length_x", report.aperture_length_x},
          {"aperture_length_y", report.aperture_length_y},
          {"sampling_spacing_x", report.sampling_spacing_x},
          {"sampling_spacing_y", report.sampling_spacing_y},
          {"max_velocity", report.max_velocity}};
}

/// Image sidecar: grid geometry plus the acquisition that produced it.
inline Json image_sidecar_json(const SarImage& image, const RunConfig& config) {
  const ImageGrid& grid = image.grid;
  return {{"schema_version", kSchemaVersion},
          {"grid",
           {{"origin", detail::vector_json(grid.origin)},
            {"spacing", detail::vector_json(grid.spacing)},
            {"counts", Json::array({grid.counts[0], grid.counts[1], grid.counts[2]})}}},
          {"radar",
           {{"center_frequency", image.metadata.center_frequency},
            {"bandwidth", image.metadata.bandwidth},
            {"prf", config.radar.prf},
            {"beamwidth_x_deg", rad_to_deg(config.radar.beamwidth_x)},
            {"beamwidth_y_deg", rad_to_deg(config.radar.beamwidth_y)},
            {"tx_rx_offset", config.radar.tx_rx_offset}}},
          {"plan", {{"mode", std::string(to_string(config.mode))}, {"accel_duration", config.accel_duration}}},
          {"pulse_count", image.metadata.pulse_count},
          {"frequency_count", image.metadata.frequency_count},
          {"window", std::string(to_string(image.metadata.window))},
          {"pgm", {{"dynamic_range_db", kPgmDynamicRangeDb}, {"columns", "x"}, {"rows", "y, then z slices"}}}};
}

/// Restores image metadata from a sidecar written by `image_sidecar_json`.
inline void apply_sidecar(SarImage& image, const Json& sidecar) {
  try {
    const Json& radar = sidecar.at("radar");
    image.metadata.center_frequency = radar.at("center_frequency").get<double>();
    image.metadata.bandwidth = radar.at("bandwidth").get<double>();
    image.metadata.pulse_count = sidecar.at("pulse_count").get<std::size_t>();
    image.metadata.frequency_count = sidecar.at("frequency_count").get<std::size_t>();
    const auto window = parse_window(sidecar.at("window").get<std::string>());
    if (!window) throw FormatError("image sidecar: unknown window");
    image.metadata.window = *window;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("image sidecar: ") + e.what());
  }
}

}  // namespace sarplan
