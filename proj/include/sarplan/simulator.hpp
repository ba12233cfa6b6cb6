#pragma once

// Point-scatterer SAR simulator: stepped-frequency echoes along a planned
// trajectory, back-projection imaging, and point-spread measurements.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sarplan/errors.hpp"
#include "sarplan/radar_constraints.hpp"
#include "sarplan/trajectory.hpp"

namespace sarplan {

using Complex = std::complex<double>;

struct EchoSet {
  std::vector<double> frequencies;
  std::vector<Eigen::Vector3d> tx_positions;
  std::vector<Eigen::Vector3d> rx_positions;
  /// Pulse-major: samples[p * frequency_count() + k].
  std::vector<Complex> samples;

  std::size_t pulse_count() const { return tx_positions.size(); }
  std::size_t frequency_count() const { return frequencies.size(); }
  bool empty() const { return pulse_count() == 0 || frequency_count() == 0; }

  std::span<const Complex> pulse(std::size_t p) const {
    return {samples.data() + p * frequency_count(), frequency_count()};
  }
  std::span<Complex> pulse(std::size_t p) { return {samples.data() + p * frequency_count(), frequency_count()}; }

  double bandwidth() const { return frequencies.empty() ? 0.0 : frequencies.back() - frequencies.front(); }
};

/// `count` frequencies evenly spaced over [fc - B/2, fc + B/2], endpoints included.
inline std::vector<double> frequency_grid(const RadarSpec& radar, std::size_t count) {
  if (count < 2) throw DomainError("frequency grid needs at least 2 points");
  std::vector<double> grid(count);
  const double step = radar.bandwidth / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) grid[k] = radar.min_frequency() + static_cast<double>(k) * step;
  return grid;
}

/// Tx and Rx phase centers, split symmetrically about the pose position along
/// the antenna z axis (perpendicular to boresight and scan direction).
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> antenna_phase_centers(const Pose& pose, double tx_rx_offset) {
  const Eigen::Vector3d half = 0.5 * tx_rx_offset * (pose.orientation * Eigen::Vector3d::UnitZ());
  return {pose.position + half, pose.position - half};
}

/// Hard-gated rectangular beam of beamwidth_x by beamwidth_y about boresight.
inline bool in_beam(const Pose& pose, const Eigen::Vector3d& point, const RadarSpec& radar) {
  const Eigen::Vector3d local = pose.orientation.conjugate() * (point - pose.position);
  if (!(local.y() > 0.0)) return false;
  const double azimuth = std::atan2(std::abs(local.x()), local.y());
  const double elevation = std::atan2(std::abs(local.z()), local.y());
  return azimuth <= 0.5 * radar.beamwidth_x && elevation <= 0.5 * radar.beamwidth_y;
}

/// Largest one-way range the frequency grid resolves without wrap-around.
inline double unambiguous_range(double bandwidth, std::size_t n_freqs) {
  return kSpeedOfLight * static_cast<double>(n_freqs - 1) / (2.0 * bandwidth);
}

/// Ideal point-target echoes for every imaging sample of `trajectory`:
/// sum of reflectivity * exp(-j 2 pi f (R_tx + R_rx) / c) over in-beam scatterers.
inline EchoSet synthesize_echoes(const SceneSpec& scene, const PoseTrajectory& trajectory, const RadarSpec& radar,
                                 std::size_t n_freqs = 128) {
  radar.validate();
  EchoSet echoes;
  echoes.frequencies = frequency_grid(radar, n_freqs);
  for (const PoseSample& sample : trajectory.samples) {
    if (!sample.imaging) continue;
    const auto [tx, rx] = antenna_phase_centers(sample.pose(), radar.tx_rx_offset);
    echoes.tx_positions.push_back(tx);
    echoes.rx_positions.push_back(rx);
  }
  if (echoes.tx_positions.empty()) throw SimulationError("trajectory has no imaging samples");
  echoes.samples.assign(echoes.pulse_count() * n_freqs, Complex(0.0, 0.0));

  const double max_range = unambiguous_range(radar.bandwidth, n_freqs);
  std::size_t p = 0;
  for (const PoseSample& sample : trajectory.samples) {
    if (!sample.imaging) continue;
    std::span<Complex> pulse = echoes.pulse(p);
    for (const Scatterer& scatterer : scene.scatterers) {
      const double r_tx = (scatterer.position - echoes.tx_positions[p]).norm();
      const double r_rx = (scatterer.position - echoes.rx_positions[p]).norm();
      if (r_tx < 1e-9 || r_rx < 1e-9) {
        throw SimulationError("scatterer coincides with an antenna phase center at pulse " + std::to_string(p));
      }
      if (!in_beam(sample.pose(), scatterer.position, radar)) continue;
      if (0.5 * (r_tx + r_rx) > max_range) {
        throw DomainError("scatterer range exceeds the unambiguous range of " + std::to_string(n_freqs) +
                          " frequencies; increase n_freqs");
      }
      const double delay = (r_tx + r_rx) / kSpeedOfLight;
      for (std::size_t k = 0; k < n_freqs; ++k) {
        pulse[k] += std::polar(scatterer.reflectivity, -2.0 * std::numbers::pi * echoes.frequencies[k] * delay);
      }
    }
    ++p;
  }
  return echoes;
}

enum class Window { rectangular, hann };

inline std::string_view to_string(Window window) { return window == Window::rectangular ? "rect" : "hann"; }

inline std::optional<Window> parse_window(std::string_view text) {
  if (text == "rect" || text == "rectangular") return Window::rectangular;
  if (text == "hann") return Window::hann;
  return std::nullopt;
}

inline std::vector<double> window_weights(Window window, std::size_t count) {
  std::vector<double> weights(count, 1.0);
  if (window == Window::hann && count > 1) {
    for (std::size_t k = 0; k < count; ++k) {
      weights[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1));
    }
  }
  return weights;
}

/// Regular voxel grid; axis 0 = x (cross-range), 1 = y (range), 2 = z (height).
struct ImageGrid {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d spacing = Eigen::Vector3d::Constant(0.005);
  std::array<std::size_t, 3> counts{1, 1, 1};

  std::size_t size() const { return counts[0] * counts[1] * counts[2]; }
  std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return ix + counts[0] * (iy + counts[1] * iz);
  }
  std::array<std::size_t, 3> cell(std::size_t index) const {
    return {index % counts[0], (index / counts[0]) % counts[1], index / (counts[0] * counts[1])};
  }
  Eigen::Vector3d position(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return origin + Eigen::Vector3d(static_cast<double>(ix) * spacing.x(), static_cast<double>(iy) * spacing.y(),
                                    static_cast<double>(iz) * spacing.z());
  }
  Eigen::Vector3d position(std::size_t index) const {
    const auto c = cell(index);
    return position(c[0], c[1], c[2]);
  }
  bool active(int axis) const { return counts[static_cast<std::size_t>(axis)] > 1; }

  /// Grid of `counts` cells centered on `center`.
  static ImageGrid centered(const Eigen::Vector3d& center, const Eigen::Vector3d& spacing,
                            std::array<std::size_t, 3> counts) {
    ImageGrid grid;
    grid.spacing = spacing;
    grid.counts = counts;
    for (int a = 0; a < 3; ++a) {
      grid.origin[a] = center[a] - 0.5 * static_cast<double>(counts[static_cast<std::size_t>(a)] - 1) * spacing[a];
    }
    return grid;
  }
};

struct ImageMetadata {
  double center_frequency = 0.0;
  double bandwidth = 0.0;
  std::size_t pulse_count = 0;
  std::size_t frequency_count = 0;
  Window window = Window::rectangular;
};

struct SarImage {
  ImageGrid grid;
  std::vector<Complex> values;
  ImageMetadata metadata;

  double magnitude(std::size_t index) const { return std::abs(values[index]); }
};

struct BackprojectOptions {
  Window window = Window::rectangular;
  /// Pixel-parallel workers; the per-pixel sum order never changes.
  unsigned threads = 1;
};

/// Each pixel sums w(f) * echo * exp(+j 2 pi f (R_tx + R_rx) / c) over pulses
/// (outer) and frequencies (inner). The per-frequency phasor is advanced by a
/// constant rotation, which requires a uniform frequency grid.
inline SarImage backproject(const EchoSet& echoes, const ImageGrid& grid, const BackprojectOptions& options = {}) {
  if (echoes.empty()) throw SimulationError("cannot back-project an empty echo set");
  const std::size_t n_freqs = echoes.frequency_count();
  if (n_freqs < 2) throw SimulationError("echo set needs at least 2 frequencies");
  if (echoes.samples.size() != echoes.pulse_count() * n_freqs || echoes.rx_positions.size() != echoes.pulse_count()) {
    throw SimulationError("echo set arrays are inconsistent");
  }
  const double f0 = echoes.frequencies.front();
  const double df = (echoes.frequencies.back() - f0) / static_cast<double>(n_freqs - 1);
  for (std::size_t k = 0; k < n_freqs; ++k) {
    if (std::abs(echoes.frequencies[k] - (f0 + static_cast<double>(k) * df)) > 1e-6 * std::abs(df)) {
      throw SimulationError("echo frequency grid is not uniform");
    }
  }
  const double resolution = range_resolution(echoes.bandwidth());
  for (int a = 0; a < 3; ++a) {
    if (grid.active(a) && !(grid.spacing[a] > 0.0 && grid.spacing[a] <= 0.5 * resolution + 1e-15)) {
      throw SimulationError("grid spacing must be positive and at most half the range resolution (" +
                            std::to_string(0.5 * resolution) + " m)");
    }
  }

  // Windowed echoes, split into real/imaginary planes for the inner loop.
  const std::vector<double> weights = window_weights(options.window, n_freqs);
  std::vector<double> echo_re(echoes.samples.size());
  std::vector<double> echo_im(echoes.samples.size());
  for (std::size_t p = 0; p < echoes.pulse_count(); ++p) {
    for (std::size_t k = 0; k < n_freqs; ++k) {
      const Complex v = weights[k] * echoes.samples[p * n_freqs + k];
      echo_re[p * n_freqs + k] = v.real();
      echo_im[p * n_freqs + k] = v.imag();
    }
  }

  SarImage image;
  image.grid = grid;
  image.values.assign(grid.size(), Complex(0.0, 0.0));
  image.metadata = {0.5 * (echoes.frequencies.front() + echoes.frequencies.back()), echoes.bandwidth(),
                    echoes.pulse_count(), n_freqs, options.window};

  constexpr double two_pi = 2.0 * std::numbers::pi;
  auto render = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::Vector3d pixel = grid.position(i);
      double acc_re = 0.0;
      double acc_im = 0.0;
      for (std::size_t p = 0; p < echoes.pulse_count(); ++p) {
        const double delay =
            ((pixel - echoes.tx_positions[p]).norm() + (pixel - echoes.rx_positions[p]).norm()) / kSpeedOfLight;
        double ph_re = std::cos(two_pi * f0 * delay);
        double ph_im = std::sin(two_pi * f0 * delay);
        const double step_re = std::cos(two_pi * df * delay);
        const double step_im = std::sin(two_pi * df * delay);
        const double* e_re = echo_re.data() + p * n_freqs;
        const double* e_im = echo_im.data() + p * n_freqs;
        for (std::size_t k = 0; k < n_freqs; ++k) {
          acc_re += e_re[k] * ph_re - e_im[k] * ph_im;
          acc_im += e_re[k] * ph_im + e_im[k] * ph_re;
          const double next_re = ph_re * step_re - ph_im * step_im;
          ph_im = ph_re * step_im + ph_im * step_re;
          ph_re = next_re;
        }
      }
      image.values[i] = Complex(acc_re, acc_im);
    }
  };

  const std::size_t total = grid.size();
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(total)));
  if (workers == 1) {
    render(0, total);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (total + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(total, w * chunk);
      const std::size_t end = std::min(total, begin + chunk);
      pool.emplace_back(render, begin, end);
    }
  }
  return image;
}

struct ResolutionMeasurement {
  Eigen::Vector3d peak_position = Eigen::Vector3d::Zero();
  double peak_magnitude = 0.0;
  /// -3 dB mainlobe widths along x (cross-range), z (height) and y (range);
  /// empty when the grid has a single cell on that axis.
  std::optional<double> width_x;
  std::optional<double> width_y;
  std::optional<double> width_range;
  /// Highest local maximum outside the mainlobe relative to the peak, dB.
  /// -inf when the image has no sidelobe.
  double peak_sidelobe_ratio = -std::numeric_limits<double>::infinity();
  /// Same ratio restricted to the axis cuts through the peak.
  double sidelobe_ratio_x = -std::numeric_limits<double>::infinity();
  double sidelobe_ratio_range = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline double to_db(double ratio) {
  return ratio > 0.0 ? 20.0 * std::log10(ratio) : -std::numeric_limits<double>::infinity();
}

inline std::vector<double> magnitudes(const SarImage& image) {
  std::vector<double> mag(image.values.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(image.values[i]);
  return mag;
}

/// True when `index` is >= every neighbour in its 3x3(x3) neighbourhood.
inline bool is_local_max(const ImageGrid& grid, const std::vector<double>& mag, std::size_t index) {
  const auto c = grid.cell(index);
  const double value = mag[index];
  if (!(value > 0.0)) return false;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const std::array<long, 3> n{static_cast<long>(c[0]) + dx, static_cast<long>(c[1]) + dy,
                                    static_cast<long>(c[2]) + dz};
        bool inside = true;
        for (std::size_t a = 0; a < 3; ++a) inside = inside && n[a] >= 0 && n[a] < static_cast<long>(grid.counts[a]);
        if (!inside) continue;
        if (mag[grid.index(static_cast<std::size_t>(n[0]), static_cast<std::size_t>(n[1]),
                           static_cast<std::size_t>(n[2]))] > value) {
          return false;
        }
      }
    }
  }
  return true;
}

/// -3 dB width along `axis` through `peak`, by linear interpolation between
/// the last cell above and the first cell below the threshold on each side.
inline double half_power_width(const ImageGrid& grid, const std::vector<double>& mag, std::size_t peak, int axis) {
  const auto a = static_cast<std::size_t>(axis);
  const auto c = grid.cell(peak);
  const double threshold = mag[peak] * std::pow(10.0, -3.0 / 20.0);
  auto at = [&](long offset) {
    auto cell = c;
    cell[a] = static_cast<std::size_t>(static_cast<long>(c[a]) + offset);
    return mag[grid.index(cell[0], cell[1], cell[2])];
  };
  auto crossing = [&](long direction) {
    long step = 0;
    while (true) {
      const long next = step + direction;
      const long position = static_cast<long>(c[a]) + next;
      if (position < 0 || position >= static_cast<long>(grid.counts[a])) {
        throw MeasurementError("mainlobe truncated by the image edge along axis " + std::to_string(axis));
      }
      const double inner = at(step);
      const double outer = at(next);
      if (outer < threshold) {
        const double fraction = (inner - threshold) / (inner - outer);
        return (static_cast<double>(step) + direction * fraction) * grid.spacing[axis];
      }
      step = next;
    }
  };
  return crossing(1) - crossing(-1);
}

}  // namespace detail

/// Measures the point-spread of the dominant peak near `expected_peak`.
inline ResolutionMeasurement measure_resolution(const SarImage& image, const Eigen::Vector3d& expected_peak) {
  const ImageGrid& grid = image.grid;
  const std::vector<double> mag = detail::magnitudes(image);
  const double global_max = mag.empty() ? 0.0 : *std::max_element(mag.begin(), mag.end());
  if (!(global_max > 0.0)) throw MeasurementError("image is empty");

  const double search_radius =
      image.metadata.bandwidth > 0.0 ? range_resolution(image.metadata.bandwidth) : grid.spacing.maxCoeff();
  std::optional<std::size_t> peak;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    if ((grid.position(i) - expected_peak).norm() > search_radius) continue;
    if (!peak || mag[i] > mag[*peak]) peak = i;
  }
  if (!peak || mag[*peak] < global_max * 1e-3) {
    throw MeasurementError("no peak above the -60 dB floor near the expected position");
  }

  ResolutionMeasurement result;
  result.peak_position = grid.position(*peak);
  result.peak_magnitude = mag[*peak];
  std::array<double, 3> widths{0.0, 0.0, 0.0};
  for (int a = 0; a < 3; ++a) {
    if (!grid.active(a)) continue;
    widths[static_cast<std::size_t>(a)] = detail::half_power_width(grid, mag, *peak, a);
  }
  if (grid.active(0)) result.width_x = widths[0];
  if (grid.active(1)) result.width_range = widths[1];
  if (grid.active(2)) result.width_y = widths[2];

  // Mainlobe exclusion: ellipsoid with semi-axes equal to the -3 dB widths,
  // i.e. a region twice the mainlobe width across.
  const auto peak_cell = grid.cell(*peak);
  auto normalized_offset = [&](std::size_t i) {
    const auto c = grid.cell(i);
    double sum = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      if (!grid.active(static_cast<int>(a))) continue;
      const double d = (static_cast<double>(c[a]) - static_cast<double>(peak_cell[a])) *
                       grid.spacing[static_cast<Eigen::Index>(a)] / widths[a];
      sum += d * d;
    }
    return std::sqrt(sum);
  };
  auto on_axis_cut = [&](std::size_t i, std::size_t axis) {
    const auto c = grid.cell(i);
    for (std::size_t a = 0; a < 3; ++a) {
      if (a != axis && c[a] != peak_cell[a]) return false;
    }
    return true;
  };

  double sidelobe = 0.0;
  double sidelobe_x = 0.0;
  double sidelobe_range = 0.0;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    if (i == *peak || normalized_offset(i) <= 1.0 || !detail::is_local_max(grid, mag, i)) continue;
    sidelobe = std::max(sidelobe, mag[i]);
  }
  // Axis cuts use 1-D local maxima of the profile through the peak.
  for (std::size_t axis : {std::size_t{0}, std::size_t{1}}) {
    if (!grid.active(static_cast<int>(axis))) continue;
    double& target = axis == 0 ? sidelobe_x : sidelobe_range;
    for (std::size_t i = 0; i < mag.size(); ++i) {
      if (!on_axis_cut(i, axis) || normalized_offset(i) <= 1.0) continue;
      auto c = grid.cell(i);
      const double left = c[axis] > 0 ? [&] { auto n = c; --n[axis]; return mag[grid.index(n[0], n[1], n[2])]; }() : 0.0;
      const double right = c[axis] + 1 < grid.counts[axis]
                               ? [&] { auto n = c; ++n[axis]; return mag[grid.index(n[0], n[1], n[2])]; }()
                               : 0.0;
      if (mag[i] >= left && mag[i] >= right) target = std::max(target, mag[i]);
    }
  }
  result.peak_sidelobe_ratio = detail::to_db(sidelobe / result.peak_magnitude);
  result.sidelobe_ratio_x = detail::to_db(sidelobe_x / result.peak_magnitude);
  result.sidelobe_ratio_range = detail::to_db(sidelobe_range / result.peak_magnitude);
  return result;
}

/// Multilinear interpolation of |image| at `point` (clamped to the grid).
inline double interpolate_magnitude(const ImageGrid& grid, const std::vector<double>& mag, const Eigen::Vector3d& point) {
  std::array<std::size_t, 3> lo{};
  std::array<double, 3> frac{};
  for (std::size_t a = 0; a < 3; ++a) {
    const auto axis = static_cast<Eigen::Index>(a);
    if (grid.counts[a] == 1) continue;
    const double u = std::clamp((point[axis] - grid.origin[axis]) / grid.spacing[axis], 0.0,
                                static_cast<double>(grid.counts[a] - 1));
    lo[a] = std::min(static_cast<std::size_t>(std::floor(u)), grid.counts[a] - 2);
    frac[a] = u - static_cast<double>(lo[a]);
  }
  double value = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double weight = 1.0;
    std::array<std::size_t, 3> c = lo;
    bool valid = true;
    for (std::size_t a = 0; a < 3; ++a) {
      const bool upper = (corner >> a) & 1;
      if (grid.counts[a] == 1) {
        if (upper) valid = false;
        continue;
      }
      c[a] += upper ? 1 : 0;
      weight *= upper ? frac[a] : 1.0 - frac[a];
    }
    if (valid) value += weight * mag[grid.index(c[0], c[1], c[2])];
  }
  return value;
}

struct Resolvability {
  bool resolved = false;
  /// Depth of the magnitude minimum between the two peaks below the weaker
  /// peak, dB (>= 0).
  double dip_depth = 0.0;
  Eigen::Vector3d peak_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d peak_b = Eigen::Vector3d::Zero();
};

/// Two-point resolvability: both positions must show distinct local maxima
/// with a dip of at least 3 dB below the weaker one between them.
inline Resolvability resolvability_check(const SarImage& image, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const ImageGrid& grid = image.grid;
  double min_spacing = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (grid.active(axis)) min_spacing = std::min(min_spacing, grid.spacing[axis]);
  }
  auto nearest_cell = [&](const Eigen::Vector3d& p) {
    std::array<std::size_t, 3> c{};
    for (std::size_t axis = 0; axis < 3; ++axis) {
      const auto e = static_cast<Eigen::Index>(axis);
      const double u = grid.counts[axis] == 1 ? 0.0 : (p[e] - grid.origin[e]) / grid.spacing[e];
      const double extent = static_cast<double>(grid.counts[axis] - 1);
      const double slack = grid.counts[axis] == 1 ? std::numeric_limits<double>::infinity() : 1e-9;
      if (u < -slack || u > extent + slack) throw MeasurementError("position lies outside the image grid");
      c[axis] = static_cast<std::size_t>(std::lround(std::clamp(u, 0.0, extent)));
    }
    return c;
  };
  const auto cell_a = nearest_cell(a);
  const auto cell_b = nearest_cell(b);
  const double separation = (a - b).norm();
  if (separation < min_spacing) throw MeasurementError("positions are closer than one grid cell");

  const std::vector<double> mag = detail::magnitudes(image);
  const long radius = std::max(1L, static_cast<long>(std::floor(0.25 * separation / min_spacing)));
  auto local_peak = [&](std::array<std::size_t, 3> center) {
    std::size_t best = grid.index(center[0], center[1], center[2]);
    for (long dz = -radius; dz <= radius; ++dz) {
      for (long dy = -radius; dy <= radius; ++dy) {
        for (long dx = -radius; dx <= radius; ++dx) {
          const std::array<long, 3> n{static_cast<long>(center[0]) + dx, static_cast<long>(center[1]) + dy,
                                      static_cast<long>(center[2]) + dz};
          bool inside = true;
          for (std::size_t axis = 0; axis < 3; ++axis) {
            inside = inside && n[axis] >= 0 && n[axis] < static_cast<long>(grid.counts[axis]);
          }
          if (!inside) continue;
          const std::size_t i = grid.index(static_cast<std::size_t>(n[0]), static_cast<std::size_t>(n[1]),
                                           static_cast<std::size_t>(n[2]));
          if (mag[i] > mag[best]) best = i;
        }
      }
    }
    return best;
  };
  const std::size_t peak_a = local_peak(cell_a);
  const std::size_t peak_b = local_peak(cell_b);

  Resolvability result;
  result.peak_a = grid.position(peak_a);
  result.peak_b = grid.position(peak_b);

  // Minimum along the segment joining the two peaks (or the given positions
  // when both collapse onto one maximum).
  const Eigen::Vector3d from = peak_a != peak_b ? result.peak_a : a;
  const Eigen::Vector3d to = peak_a != peak_b ? result.peak_b : b;
  const auto steps = static_cast<std::size_t>(std::ceil(4.0 * (to - from).norm() / min_spacing)) + 1;
  double valley = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps);
    valley = std::min(valley, interpolate_magnitude(grid, mag, from + t * (to - from)));
  }
  const double weaker = std::min(mag[peak_a], mag[peak_b]);
  result.dip_depth = valley > 0.0 ? std::max(0.0, detail::to_db(weaker / valley))
                                  : (weaker > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  const bool distinct_maxima =
      peak_a != peak_b && detail::is_local_max(grid, mag, peak_a) && detail::is_local_max(grid, mag, peak_b);
  result.resolved = distinct_maxima && result.dip_depth >= 3.0;
  return result;
}

// Binary exchange formats. Everything little-endian.

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

inline void write_magic(std::ostream& out, std::string_view magic) { out.write(magic.data(), 4); }

inline void expect_magic(std::istream& in, std::string_view magic) {
  char buffer[4] = {};
  if (!in.read(buffer, 4) || std::string_view(buffer, 4) != magic) {
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
  }
}

inline void write_vector(std::ostream& out, const Eigen::Vector3d& v) {
  for (int a = 0; a < 3; ++a) write_le<double>(out, v[a]);
}

inline Eigen::Vector3d read_vector(std::istream& in, const char* what) {
  Eigen::Vector3d v;
  for (int a = 0; a < 3; ++a) v[a] = read_le<double>(in, what);
  return v;
}

}  // namespace detail

inline constexpr std::string_view kEchoMagic = "UWBE";
inline constexpr std::uint32_t kEchoFormatVersion = 1;

/// Header (magic, version, n_pulses, n_freqs), f64 frequency grid, then per
/// pulse: Tx xyz, Rx xyz, interleaved re/im samples.
inline void write_echoes(std::ostream& out, const EchoSet& echoes) {
  detail::write_magic(out, kEchoMagic);
  detail::write_le<std::uint32_t>(out, kEchoFormatVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(echoes.pulse_count()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(echoes.frequency_count()));
  for (double f : echoes.frequencies) detail::write_le<double>(out, f);
  for (std::size_t p = 0; p < echoes.pulse_count(); ++p) {
    detail::write_vector(out, echoes.tx_positions[p]);
    detail::write_vector(out, echoes.rx_positions[p]);
    for (const Complex& v : echoes.pulse(p)) {
      detail::write_le<double>(out, v.real());
      detail::write_le<double>(out, v.imag());
    }
  }
}

inline EchoSet read_echoes(std::istream& in) {
  detail::expect_magic(in, kEchoMagic);
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kEchoFormatVersion) throw FormatError("unsupported echo format version " + std::to_string(version));
  const auto n_pulses = detail::read_le<std::uint32_t>(in, "pulse count");
  const auto n_freqs = detail::read_le<std::uint32_t>(in, "frequency count");
  EchoSet echoes;
  echoes.frequencies.resize(n_freqs);
  for (auto& f : echoes.frequencies) f = detail::read_le<double>(in, "frequency grid");
  echoes.samples.resize(static_cast<std::size_t>(n_pulses) * n_freqs);
  for (std::uint32_t p = 0; p < n_pulses; ++p) {
    echoes.tx_positions.push_back(detail::read_vector(in, "tx position"));
    echoes.rx_positions.push_back(detail::read_vector(in, "rx position"));
    for (Complex& v : echoes.pulse(p)) {
      const double re = detail::read_le<double>(in, "samples");
      const double im = detail::read_le<double>(in, "samples");
      v = Complex(re, im);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after echo payload");
  return echoes;
}

inline constexpr std::string_view kImageMagic = "UWBI";
inline constexpr std::uint32_t kImageFormatVersion = 1;

/// Raw complex image: magic, version, nx, ny, nz, origin, spacing, then
/// interleaved re/im values in grid order.
inline void write_image(std::ostream& out, const SarImage& image) {
  detail::write_magic(out, kImageMagic);
  detail::write_le<std::uint32_t>(out, kImageFormatVersion);
  for (std::size_t c : image.grid.counts) detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c));
  detail::write_vector(out, image.grid.origin);
  detail::write_vector(out, image.grid.spacing);
  for (const Complex& v : image.values) {
    detail::write_le<double>(out, v.real());
    detail::write_le<double>(out, v.imag());
  }
}

/// Reads grid and values; metadata is carried by the JSON sidecar.
inline SarImage read_image(std::istream& in) {
  detail::expect_magic(in, kImageMagic);
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kImageFormatVersion) throw FormatError("unsupported image format version " + std::to_string(version));
  SarImage image;
  for (std::size_t& c : image.grid.counts) {
    c = detail::read_le<std::uint32_t>(in, "grid counts");
    if (c == 0) throw FormatError("image grid has an empty axis");
  }
  image.grid.origin = detail::read_vector(in, "grid origin");
  image.grid.spacing = detail::read_vector(in, "grid spacing");
  image.values.resize(image.grid.size());
  for (Complex& v : image.values) {
    const double re = detail::read_le<double>(in, "values");
    const double im = detail::read_le<double>(in, "values");
    v = Complex(re, im);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after image payload");
  return image;
}

inline constexpr double kPgmDynamicRangeDb = 40.0;

/// ASCII PGM of |image| in dB relative to the maximum, 0-255 over a 40 dB
/// window. Columns are x; rows are y, with z slices stacked below each other.
inline void write_pgm(std::ostream& out, const SarImage& image) {
  const auto& counts = image.grid.counts;
  const std::vector<double> mag = detail::magnitudes(image);
  const double peak = mag.empty() ? 0.0 : *std::max_element(mag.begin(), mag.end());
  out << "P2\n" << counts[0] << ' ' << counts[1] * counts[2] << "\n255\n";
  for (std::size_t row = 0; row < counts[1] * counts[2]; ++row) {
    for (std::size_t ix = 0; ix < counts[0]; ++ix) {
      const double value = mag[ix + counts[0] * row];
      int level = 0;
      if (peak > 0.0 && value > 0.0) {
        const double db = std::max(-kPgmDynamicRangeDb, 20.0 * std::log10(value / peak));
        level = static_cast<int>(std::lround((db + kPgmDynamicRangeDb) / kPgmDynamicRangeDb * 255.0));
      }
      out << level << (ix + 1 == counts[0] ? '\n' : ' ');
    }
  }
}

}  // namespace sarplan
