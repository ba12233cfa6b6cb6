#pragma once

// Time-parameterized end-effector trajectories for planar SAR scans: one
// trapezoidal linear move per height slice, joined into a meander.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sarplan/errors.hpp"
#include "sarplan/geometry.hpp"
#include "sarplan/radar_constraints.hpp"

namespace sarplan {

enum class ScanMode { stripmap, spotlight };

inline std::string_view to_string(ScanMode mode) { return mode == ScanMode::stripmap ? "stripmap" : "spotlight"; }

inline std::optional<ScanMode> parse_scan_mode(std::string_view text) {
  if (text == "stripmap") return ScanMode::stripmap;
  if (text == "spotlight") return ScanMode::spotlight;
  return std::nullopt;
}

/// Ramp / cruise / ramp speed schedule of a single linear move.
struct VelocityProfile {
  double cruise_velocity = 0.0;
  double accel_duration = 0.0;
  double cruise_distance = 0.0;
  double total_distance = 0.0;
  double total_duration = 0.0;

  double cruise_duration() const { return cruise_distance / cruise_velocity; }
};

inline VelocityProfile trapezoid_profile(double distance, double cruise_velocity, double accel_duration) {
  detail::require_positive(distance, "distance");
  detail::require_positive(cruise_velocity, "cruise_velocity");
  detail::require_positive(accel_duration, "accel_duration");
  const double ramp_distance = cruise_velocity * accel_duration;  // both ramps together
  if (!(distance > ramp_distance)) {
    throw PlanError("distance " + std::to_string(distance) + " m leaves no cruise phase after ramps covering " +
                    std::to_string(ramp_distance) + " m; reduce accel_duration or cruise velocity");
  }
  VelocityProfile profile;
  profile.cruise_velocity = cruise_velocity;
  profile.accel_duration = accel_duration;
  profile.cruise_distance = distance - ramp_distance;
  profile.total_distance = distance;
  profile.total_duration = profile.cruise_distance / cruise_velocity + 2.0 * accel_duration;
  return profile;
}

/// Arc length travelled at `time` (closed-form integral of the profile).
inline double sample_position(const VelocityProfile& profile, double time) {
  const double total = profile.total_duration;
  const double slack = 1e-12 * std::max(1.0, total);
  if (!(time >= -slack && time <= total + slack)) {
    throw DomainError("time " + std::to_string(time) + " s outside [0, " + std::to_string(total) + "]");
  }
  time = std::clamp(time, 0.0, total);
  const double v = profile.cruise_velocity;
  const double ta = profile.accel_duration;
  const double accel = v / ta;
  const double cruise_end = total - ta;
  if (time <= ta) return 0.5 * accel * time * time;
  if (time <= cruise_end) return 0.5 * v * ta + v * (time - ta);
  const double remaining = total - time;
  return profile.total_distance - 0.5 * accel * remaining * remaining;
}

inline double sample_velocity(const VelocityProfile& profile, double time) {
  const double ta = profile.accel_duration;
  const double v = profile.cruise_velocity;
  if (time <= 0.0 || time >= profile.total_duration) return 0.0;
  if (time < ta) return v * time / ta;
  if (time > profile.total_duration - ta) return v * (profile.total_duration - time) / ta;
  return v;
}

struct PoseSample {
  double time = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  /// False on ramps and slice transitions; the imager skips these.
  bool imaging = false;

  Pose pose() const { return {position, orientation}; }
};

struct PoseTrajectory {
  std::vector<PoseSample> samples;
  ScanMode mode = ScanMode::stripmap;
  std::vector<double> slice_heights;

  std::size_t imaging_count() const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const PoseSample& s) { return s.imaging; }));
  }
};

struct PlanOptions {
  double accel_duration = 2.0;
  /// Overrides the default cruise velocity; may exceed the report's cap, in
  /// which case validation reports the violation.
  std::optional<double> cruise_velocity;
  /// Keep at most this many slices, centered on the target height.
  std::optional<std::size_t> max_slices;
};

inline double floor_to_significant(double value, int digits) {
  if (!(value > 0.0)) return value;
  const double unit = std::pow(10.0, std::floor(std::log10(value)) - (digits - 1));
  return std::floor(value / unit + 1e-9) * unit;
}

/// 0.1 m/s whenever the cap allows 0.11 m/s, else 90% of the cap rounded
/// down to two significant figures.
inline double default_cruise_velocity(double max_velocity) {
  detail::require_positive(max_velocity, "max_velocity");
  if (max_velocity >= 0.11) return 0.1;
  return floor_to_significant(0.9 * max_velocity, 2);
}

/// Slices needed so that rows spaced `pitch` apart span `aperture_y`.
inline std::size_t slice_count(double aperture_y, double pitch) {
  detail::require_positive(pitch, "slice pitch");
  if (!(aperture_y >= 0.0) || !std::isfinite(aperture_y)) {
    throw PlanError("aperture_length_y must be finite and >= 0");
  }
  return static_cast<std::size_t>(std::ceil(aperture_y / pitch - 1e-9)) + 1;
}

namespace detail {

struct PieceSampler {
  double prf;
  double piece_start = 0.0;
  bool first_piece = true;

  /// Local sample times of a piece of `duration`: every 1/PRF plus the end
  /// point. The start sample is dropped after the first piece since it
  /// duplicates the previous end.
  std::vector<double> local_times(double duration) const {
    std::vector<double> times;
    const auto steps = static_cast<std::size_t>(std::floor(duration * prf + 1e-9));
    for (std::size_t i = first_piece ? 0 : 1; i <= steps; ++i) times.push_back(static_cast<double>(i) / prf);
    if (times.empty() || duration - times.back() > 1e-9) times.push_back(duration);
    return times;
  }
};

inline PoseTrajectory plan_linear_meander(const ConstraintReport& report, const RadarSpec& radar,
                                          const SceneSpec& scene, const PlanOptions& options, ScanMode mode) {
  radar.validate();
  scene.validate();
  const double cruise = options.cruise_velocity ? *options.cruise_velocity : default_cruise_velocity(report.max_velocity);
  detail::require_positive(cruise, "cruise_velocity");
  detail::require_positive(options.accel_duration, "accel_duration");

  const double pitch = report.sampling_spacing_y;
  std::size_t n_slices = slice_count(report.aperture_length_y, pitch);
  if (options.max_slices) {
    if (*options.max_slices == 0) throw PlanError("max_slices must be >= 1");
    n_slices = std::min(n_slices, *options.max_slices);
  }

  const VelocityProfile segment = trapezoid_profile(report.aperture_length_x, cruise, options.accel_duration);
  const double scan_y = scene.center.y() - scene.standoff_range;
  const double half_length = 0.5 * report.aperture_length_x;

  PoseTrajectory trajectory;
  trajectory.mode = mode;
  for (std::size_t k = 0; k < n_slices; ++k) {
    trajectory.slice_heights.push_back(scene.center.z() +
                                       (static_cast<double>(k) - 0.5 * static_cast<double>(n_slices - 1)) * pitch);
  }

  PieceSampler sampler{radar.prf};
  auto emit = [&](const Eigen::Vector3d& position, double time, bool imaging) {
    PoseSample sample;
    sample.time = time;
    sample.position = position;
    sample.imaging = imaging;
    if (mode == ScanMode::spotlight) {
      sample.orientation = look_at(position, scene.center);
      if (!trajectory.samples.empty() &&
          trajectory.samples.back().orientation.coeffs().dot(sample.orientation.coeffs()) < 0.0) {
        sample.orientation.coeffs() = -sample.orientation.coeffs();
      }
    }
    trajectory.samples.push_back(sample);
  };

  for (std::size_t k = 0; k < n_slices; ++k) {
    const double direction = (k % 2 == 0) ? 1.0 : -1.0;
    const double z = trajectory.slice_heights[k];
    const double x_start = scene.center.x() - direction * half_length;
    const double cruise_begin = segment.accel_duration - 1e-9;
    const double cruise_end = segment.total_duration - segment.accel_duration + 1e-9;
    for (double t : sampler.local_times(segment.total_duration)) {
      const double x = x_start + direction * sample_position(segment, t);
      emit({x, scan_y, z}, sampler.piece_start + t, t >= cruise_begin && t <= cruise_end);
    }
    sampler.piece_start += segment.total_duration;
    sampler.first_piece = false;

    if (k + 1 == n_slices) break;
    // Stop-move-stop climb to the next slice; ramps shortened to fit the pitch.
    const double rise = trajectory.slice_heights[k + 1] - z;
    const double x_end = x_start + direction * report.aperture_length_x;
    const double ramp = std::min(options.accel_duration, 0.5 * rise / cruise);
    const VelocityProfile climb = trapezoid_profile(rise, cruise, ramp);
    for (double t : sampler.local_times(climb.total_duration)) {
      emit({x_end, scan_y, z + sample_position(climb, t)}, sampler.piece_start + t, false);
    }
    sampler.piece_start += climb.total_duration;
  }
  return trajectory;
}

}  // namespace detail

/// Fixed-orientation meander: one horizontal segment of length Lx per height
/// slice, alternating direction, slices one vertical Nyquist spacing apart.
inline PoseTrajectory plan_stripmap(const ConstraintReport& report, const RadarSpec& radar, const SceneSpec& scene,
                                    const PlanOptions& options = {}) {
  return detail::plan_linear_meander(report, radar, scene, options, ScanMode::stripmap);
}

/// Same path as `plan_stripmap`, with every pose steered at the scene center.
inline PoseTrajectory plan_spotlight(const ConstraintReport& report, const RadarSpec& radar, const SceneSpec& scene,
                                     const PlanOptions& options = {}) {
  return detail::plan_linear_meander(report, radar, scene, options, ScanMode::spotlight);
}

struct TrajectoryViolation {
  std::size_t index = 0;  // later sample of the offending pair
  std::string quantity;   // "scan_spacing", "speed" or "undefined_speed"
  double limit = 0.0;
  double actual = 0.0;
};

inline std::vector<TrajectoryViolation> validate_trajectory(const PoseTrajectory& trajectory,
                                                            const ConstraintReport& report) {
  if (trajectory.samples.empty()) throw PlanError("cannot validate an empty trajectory");
  std::vector<TrajectoryViolation> violations;
  const auto& samples = trajectory.samples;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const PoseSample& prev = samples[i - 1];
    const PoseSample& cur = samples[i];
    if (prev.imaging && cur.imaging) {
      const double spacing = std::abs(cur.position.x() - prev.position.x());
      if (spacing > report.sampling_spacing_x + 1e-12) {
        violations.push_back({i, "scan_spacing", report.sampling_spacing_x, spacing});
      }
    }
    const double dt = cur.time - prev.time;
    const double distance = (cur.position - prev.position).norm();
    if (!(dt > 0.0)) {
      violations.push_back({i, "undefined_speed", report.max_velocity, distance > 0.0 ? INFINITY : NAN});
      continue;
    }
    const double speed = distance / dt;
    if (speed > report.max_velocity + 1e-12) violations.push_back({i, "speed", report.max_velocity, speed});
  }
  return violations;
}

// CSV exchange format: one header line, 9 decimals.

inline constexpr std::string_view kTrajectoryCsvHeader = "time_s,x_m,y_m,z_m,qw,qx,qy,qz,imaging_flag";

inline void write_trajectory_csv(std::ostream& out, const PoseTrajectory& trajectory) {
  out << kTrajectoryCsvHeader << '\n';
  char line[256];
  for (const PoseSample& s : trajectory.samples) {
    const Eigen::Quaterniond& q = s.orientation;
    std::snprintf(line, sizeof line, "%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%d\n", s.time, s.position.x(),
                  s.position.y(), s.position.z(), q.w(), q.x(), q.y(), q.z(), s.imaging ? 1 : 0);
    out << line;
  }
}

namespace detail {

inline std::vector<double> parse_csv_numbers(const std::string& line, std::size_t expected, std::size_t line_no) {
  std::vector<double> values;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(field, &used));
      while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw FormatError("line " + std::to_string(line_no) + ": not a number: '" + field + "'");
    }
  }
  if (values.size() != expected) {
    throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected) + " fields, got " +
                      std::to_string(values.size()));
  }
  return values;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

/// Parses the trajectory CSV. Mode and slice heights are not part of the
/// format; slice heights are recovered from the imaging rows.
inline PoseTrajectory read_trajectory_csv(std::istream& in, ScanMode mode = ScanMode::stripmap) {
  std::string line;
  if (!std::getline(in, line) || detail::strip_cr(line) != kTrajectoryCsvHeader) {
    throw FormatError("trajectory CSV: missing or unexpected header");
  }
  PoseTrajectory trajectory;
  trajectory.mode = mode;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto v = detail::parse_csv_numbers(line, 9, line_no);
    PoseSample s;
    s.time = v[0];
    s.position = {v[1], v[2], v[3]};
    s.orientation = Eigen::Quaterniond(v[4], v[5], v[6], v[7]);
    const double norm = s.orientation.norm();
    if (!(std::abs(norm - 1.0) < 1e-6)) {
      throw FormatError("line " + std::to_string(line_no) + ": quaternion is not unit length");
    }
    s.orientation.normalize();
    if (v[8] != 0.0 && v[8] != 1.0) throw FormatError("line " + std::to_string(line_no) + ": imaging_flag must be 0/1");
    s.imaging = v[8] == 1.0;
    if (s.imaging && (trajectory.slice_heights.empty() ||
                      std::abs(trajectory.slice_heights.back() - s.position.z()) > 1e-9)) {
      trajectory.slice_heights.push_back(s.position.z());
    }
    trajectory.samples.push_back(s);
  }
  return trajectory;
}

}  // namespace sarplan
