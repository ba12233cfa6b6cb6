#pragma once

// Closed-form acquisition constraints for a planar UWB SAR scan: range and
// cross-range resolution, scan margins, Nyquist spatial sampling and the
// resulting velocity cap.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sarplan/errors.hpp"

namespace sarplan {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s, exact SI value

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

namespace detail {

inline void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError(std::string(what) + " must be finite and > 0");
  }
}

inline void require_beamwidth(double beamwidth, const char* what) {
  if (!(beamwidth > 0.0 && beamwidth < std::numbers::pi)) {
    throw DomainError(std::string(what) + " must lie in (0, pi) radians");
  }
}

}  // namespace detail

/// Emitter/receiver parameters. Angles in radians, frequencies in Hz.
struct RadarSpec {
  double center_frequency = 8.0e9;
  double bandwidth = 4.0e9;
  double prf = 12.0;
  double beamwidth_x = deg_to_rad(20.0);
  double beamwidth_y = deg_to_rad(20.0);
  double tx_rx_offset = 0.06;  // common-offset baseline, meters

  double center_wavelength() const { return kSpeedOfLight / center_frequency; }
  double max_frequency() const { return center_frequency + 0.5 * bandwidth; }
  double min_frequency() const { return center_frequency - 0.5 * bandwidth; }
  /// Wavelength at the top of the chirp, fc + B/2.
  double min_wavelength() const { return kSpeedOfLight / max_frequency(); }

  void validate() const {
    detail::require_positive(bandwidth, "radar.bandwidth");
    detail::require_positive(center_frequency, "radar.center_frequency");
    if (!(center_frequency > 0.5 * bandwidth)) {
      throw DomainError("radar.center_frequency must exceed bandwidth/2 (lowest frequency positive)");
    }
    detail::require_positive(prf, "radar.prf");
    detail::require_beamwidth(beamwidth_x, "radar.beamwidth_x");
    detail::require_beamwidth(beamwidth_y, "radar.beamwidth_y");
    if (!(tx_rx_offset >= 0.0) || !std::isfinite(tx_rx_offset)) {
      throw DomainError("radar.tx_rx_offset must be finite and >= 0");
    }
  }
};

struct Scatterer {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double reflectivity = 1.0;
};

/// Target box and scatterer list. World frame: x = scan direction,
/// y = boresight (range), z = up. `target_dy` is the vertical extent.
struct SceneSpec {
  double target_dx = 0.5;
  double target_dy = 0.3;
  double standoff_range = 0.5;
  double relative_permittivity = 1.0;
  /// Target box center; the scan plane sits at center.y - standoff_range.
  Eigen::Vector3d center{0.0, 1.0, 0.30};
  /// Operator-pinned aperture lengths. When set they replace the rounded
  /// minimum, and must not be shorter than it.
  std::optional<double> aperture_length_x;
  std::optional<double> aperture_length_y;
  std::vector<Scatterer> scatterers;

  void validate() const {
    detail::require_positive(target_dx, "scene.target_dx");
    detail::require_positive(target_dy, "scene.target_dy");
    detail::require_positive(standoff_range, "scene.standoff_range");
    if (!(relative_permittivity >= 1.0) || !std::isfinite(relative_permittivity)) {
      throw DomainError("scene.relative_permittivity must be finite and >= 1");
    }
    if (!center.allFinite()) throw DomainError("scene.center must be finite");
  }
};

struct ConstraintReport {
  double range_resolution = 0.0;
  double cross_range_resolution_x = 0.0;
  double cross_range_resolution_y = 0.0;
  double scan_margin_x = 0.0;
  double scan_margin_y = 0.0;
  double aperture_length_x = 0.0;
  double aperture_length_y = 0.0;
  double sampling_spacing_x = 0.0;
  double sampling_spacing_y = 0.0;
  double max_velocity = 0.0;
};

/// c / 2B.
inline double range_resolution(double bandwidth) {
  detail::require_positive(bandwidth, "bandwidth");
  return kSpeedOfLight / (2.0 * bandwidth);
}

/// Aperture-limited cross-range resolution R * lambda_c / (2 l).
inline double cross_range_resolution_aperture(double range, double wavelength, double aperture_length) {
  detail::require_positive(range, "range");
  detail::require_positive(wavelength, "wavelength");
  detail::require_positive(aperture_length, "aperture_length");
  return range * wavelength / (2.0 * aperture_length);
}

/// Beam-limited cross-range resolution lambda_c / (2 theta).
inline double cross_range_resolution_beam(double wavelength, double beamwidth) {
  detail::require_positive(wavelength, "wavelength");
  detail::require_beamwidth(beamwidth, "beamwidth");
  return wavelength / (2.0 * beamwidth);
}

/// Aperture at which cross-range resolution equals range resolution: R * B / fc.
inline double matched_aperture_length(double range, double center_frequency, double bandwidth) {
  detail::require_positive(range, "range");
  detail::require_positive(center_frequency, "center_frequency");
  detail::require_positive(bandwidth, "bandwidth");
  return range * bandwidth / center_frequency;
}

/// Half-beam extension R * tan(theta / 2) added on each side of the target.
inline double scan_margin(double range, double beamwidth) {
  detail::require_positive(range, "range");
  if (!(beamwidth >= 0.0 && beamwidth < std::numbers::pi)) {
    throw DomainError("beamwidth must lie in [0, pi) radians");
  }
  return range * std::tan(0.5 * beamwidth);
}

/// Maximum spacing between aperture positions that samples the phase history
/// of every scatterer in the target box without aliasing. Permittivity
/// shortens the effective wavelength by sqrt(er).
inline double nyquist_spacing(double min_wavelength, double aperture_length, double target_dim, double range,
                              double relative_permittivity = 1.0) {
  detail::require_positive(min_wavelength, "min_wavelength");
  detail::require_positive(range, "range");
  if (!(aperture_length >= 0.0) || !(target_dim >= 0.0)) {
    throw DomainError("aperture_length and target_dim must be >= 0");
  }
  if (!(relative_permittivity >= 1.0) || !std::isfinite(relative_permittivity)) {
    throw DomainError("relative_permittivity must be finite and >= 1");
  }
  const double extent = aperture_length + target_dim;
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw DomainError("aperture_length + target_dim must be finite and > 0");
  }
  const double wavelength = min_wavelength / std::sqrt(relative_permittivity);
  return 0.5 * wavelength * std::sqrt(0.25 * extent * extent + range * range) / extent;
}

inline double max_velocity(double sampling_spacing, double prf) {
  detail::require_positive(sampling_spacing, "sampling_spacing");
  detail::require_positive(prf, "prf");
  return sampling_spacing * prf;
}

/// Round a length up to the next multiple of `step`. Values already on a
/// multiple (within 1e-9 of a step) stay put.
inline double round_up_to(double length, double step) {
  return std::ceil(length / step - 1e-9) * step;
}

inline constexpr double kApertureRoundingStep = 0.1;  // meters

namespace detail {

inline double resolve_aperture(double required, const std::optional<double>& pinned, const char* field) {
  const double rounded = round_up_to(required, kApertureRoundingStep);
  if (!pinned) return rounded;
  if (!(*pinned > 0.0) || !std::isfinite(*pinned)) {
    throw DomainError(std::string(field) + " must be finite and > 0");
  }
  if (*pinned + 1e-12 < required) {
    throw DomainError(std::string(field) + " is shorter than target dimension plus scan margins (" +
                      std::to_string(required) + " m)");
  }
  return *pinned;
}

}  // namespace detail

/// Aggregate every constraint into one plan-ready report.
inline ConstraintReport build_report(const RadarSpec& radar, const SceneSpec& scene) {
  radar.validate();
  scene.validate();

  ConstraintReport report;
  const double range = scene.standoff_range;
  const double lambda_c = radar.center_wavelength();

  report.range_resolution = range_resolution(radar.bandwidth);
  report.cross_range_resolution_x = cross_range_resolution_beam(lambda_c, radar.beamwidth_x);
  report.cross_range_resolution_y = cross_range_resolution_beam(lambda_c, radar.beamwidth_y);
  report.scan_margin_x = scan_margin(range, radar.beamwidth_x);
  report.scan_margin_y = scan_margin(range, radar.beamwidth_y);

  report.aperture_length_x = detail::resolve_aperture(scene.target_dx + 2.0 * report.scan_margin_x,
                                                      scene.aperture_length_x, "scene.aperture_length_x");
  report.aperture_length_y = detail::resolve_aperture(scene.target_dy + 2.0 * report.scan_margin_y,
                                                      scene.aperture_length_y, "scene.aperture_length_y");

  const double lambda_min = radar.min_wavelength();
  report.sampling_spacing_x =
      nyquist_spacing(lambda_min, report.aperture_length_x, scene.target_dx, range, scene.relative_permittivity);
  report.sampling_spacing_y =
      nyquist_spacing(lambda_min, report.aperture_length_y, scene.target_dy, range, scene.relative_permittivity);
  report.max_velocity = max_velocity(report.sampling_spacing_x, radar.prf);
  return report;
}

}  // namespace sarplan
