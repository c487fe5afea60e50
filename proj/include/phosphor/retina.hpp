// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace phosphor {

using Point = Eigen::Vector2d;

/// Retinal coordinates in micrometers for a right eye: fovea at the origin,
/// +x nasal (toward the optic disc), +y superior.
enum class Eye { Right };

struct RetinalCoordinateFrame {
  Eye eye = Eye::Right;
  Point optic_disc_center{4200.0, 0.0};
  double optic_disc_radius_um = 900.0;
  double um_per_degree = 280.0;
  /// The modeled retina is the square |x|, |y| <= half_extent_um.
  double half_extent_um = 5000.0;

  void validate() const;
  bool inside_disc(const Point& p) const;
  bool inside_extent(const Point& p) const;
};

/// Parameters of the nerve-fiber-bundle model. The default "spiral_fan"
/// model works in polar coordinates (r, theta) about the optic disc with
/// theta measured from the nasal direction, so theta = +-180 deg is the
/// temporal raphe. A bundle leaving the disc at theta0 follows
///
///   theta(r) = sign(theta0) * (|theta0| + c1 * ((r - r0) / 1000)^c2),  r > r0
///
/// and terminates where it reaches the raphe.
struct BundleModelConfig {
  std::string model = "spiral_fan";
  double r0_um = 1000.0;
  double c1_deg = 8.0;
  double c2 = 1.3;
  double step_um = 100.0;
  /// Vertices after the soma sit on a square lattice of this pitch; 0 keeps
  /// them continuous.
  double lattice_um = 5.0;

  void validate() const;
  bool operator==(const BundleModelConfig&) const = default;
};

/// Axon polyline from the soma (index 0) to the optic disc boundary.
struct AxonBundle {
  std::vector<Point> segments;
  std::vector<double> cumulative_path_length;

  const Point& soma() const { return segments.front(); }
  std::size_t size() const { return segments.size(); }
};

/// Pluggable trajectory model.
class BundleModel {
 public:
  virtual ~BundleModel() = default;
  virtual AxonBundle trace(const Point& soma, const RetinalCoordinateFrame& frame) const = 0;
};

std::unique_ptr<BundleModel> make_bundle_model(const BundleModelConfig& config);

/// Traces the bundle of the ganglion cell at `soma`. Throws
/// Error(SomaInsideDisc) or Error(OutOfExtent).
AxonBundle trace_bundle(const Point& soma, const RetinalCoordinateFrame& frame,
                        const BundleModelConfig& config);

/// Arc length from the soma to segment `index`. Throws Error(IndexOutOfRange).
double path_length_to(const AxonBundle& bundle, std::size_t index);

/// Builds the cumulative arc-length column for a polyline.
AxonBundle make_bundle(std::vector<Point> segments);

enum class DecayForm { Gaussian, Exponential };

struct AxonMapParams {
  double rho_um = 100.0;
  double lambda_um = 0.0;
  DecayForm decay = DecayForm::Gaussian;

  void validate() const;
  bool operator==(const AxonMapParams&) const = default;
};

/// Decay factor for a distance (or path length) under a width constant.
inline double decay_factor(double distance, double width, DecayForm form) {
  if (form == DecayForm::Gaussian) return std::exp(-(distance * distance) / (2.0 * width * width));
  return std::exp(-distance / width);
}

struct Extent {
  double x_min = -4500.0;
  double x_max = 4500.0;
  double y_min = -4500.0;
  double y_max = 4500.0;

  bool operator==(const Extent&) const = default;
};

/// Regular lattice of ganglion-cell somata, one per percept pixel. Row 0 is
/// the superior edge (y_max); column 0 the temporal edge (x_min).
struct PerceptGrid {
  RetinalCoordinateFrame frame;
  int width = 0;
  int height = 0;
  Extent extent;
  Eigen::ArrayXd xs;  // per column
  Eigen::ArrayXd ys;  // per row

  Point soma(int row, int col) const { return {xs(col), ys(row)}; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  /// Stable textual identity used to match tables and frames to a grid.
  std::string identity() const;
};

/// Throws Error(BadExtent) for degenerate or out-of-retina extents and for
/// fewer than two pixels per axis.
PerceptGrid build_percept_grid(const RetinalCoordinateFrame& frame, int width, int height,
                               const Extent& extent);

/// 256 x 256 pixels over +-4500 um.
PerceptGrid default_percept_grid(int width = 256, int height = 256);

}  // namespace phosphor
