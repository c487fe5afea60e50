// SPDX-License-Identifier: Apache-2.0
#include "phosphor/retina.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "phosphor/error.hpp"

namespace phosphor {

void RetinalCoordinateFrame::validate() const {
  if (!(um_per_degree > 0.0)) throw Error(ErrorCode::InvalidArgument, "um_per_degree must be positive");
  if (!(optic_disc_center.x() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "optic disc must lie nasal (+x) to the fovea");
  }
  if (!(optic_disc_radius_um > 0.0)) throw Error(ErrorCode::InvalidArgument, "disc radius must be positive");
  if (!(half_extent_um > 0.0)) throw Error(ErrorCode::InvalidArgument, "retina extent must be positive");
}

bool RetinalCoordinateFrame::inside_disc(const Point& p) const {
  return (p - optic_disc_center).norm() <= optic_disc_radius_um;
}

bool RetinalCoordinateFrame::inside_extent(const Point& p) const {
  return std::abs(p.x()) <= half_extent_um && std::abs(p.y()) <= half_extent_um;
}

void BundleModelConfig::validate() const {
  if (model != "spiral_fan") throw Error(ErrorCode::InvalidArgument, "unknown bundle model '" + model + "'");
  if (!(r0_um >= 0.0) || !(c1_deg >= 0.0) || !(c2 > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "spiral_fan requires r0 >= 0, c1 >= 0, c2 > 0");
  }
  if (!(step_um > 0.0) || !(lattice_um >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "step must be positive and lattice non-negative");
  }
  if (lattice_um * std::numbers::sqrt2 >= 0.5 * step_um) {
    throw Error(ErrorCode::InvalidArgument, "lattice pitch too coarse for the segment step");
  }
}

void AxonMapParams::validate() const {
  if (!(rho_um > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be positive");
  if (!(lambda_um >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be non-negative");
}

AxonBundle make_bundle(std::vector<Point> segments) {
  AxonBundle bundle;
  bundle.cumulative_path_length.resize(segments.size());
  double total = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) total += (segments[i] - segments[i - 1]).norm();
    bundle.cumulative_path_length[i] = total;
  }
  bundle.segments = std::move(segments);
  return bundle;
}

double path_length_to(const AxonBundle& bundle, std::size_t index) {
  if (index >= bundle.cumulative_path_length.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "segment index " + std::to_string(index) + " out of range");
  }
  return bundle.cumulative_path_length[index];
}

namespace {

class SpiralFanModel final : public BundleModel {
 public:
  explicit SpiralFanModel(BundleModelConfig config) : config_(std::move(config)) {
    config_.validate();
    c1_rad_ = config_.c1_deg * std::numbers::pi / 180.0;
    walk_step_ = config_.step_um - std::numbers::sqrt2 * config_.lattice_um;
  }

  AxonBundle trace(const Point& soma, const RetinalCoordinateFrame& frame) const override {
    frame.validate();
    if (!frame.inside_extent(soma)) throw Error(ErrorCode::OutOfExtent, "soma outside the modeled retina");
    if (frame.inside_disc(soma)) throw Error(ErrorCode::SomaInsideDisc, "soma lies inside the optic disc");

    std::vector<Point> path = soma.y() == 0.0 ? meridian_path(soma, frame) : fan_path(soma, frame);
    std::vector<Point> snapped;
    snapped.reserve(path.size());
    snapped.push_back(soma);
    for (std::size_t i = 1; i < path.size(); ++i) {
      Point p = snap(path[i]);
      if ((p - snapped.back()).squaredNorm() > 0.0) snapped.push_back(p);
    }
    return make_bundle(std::move(snapped));
  }

 private:
  double sweep(double r) const {
    if (r <= config_.r0_um) return 0.0;
    return c1_rad_ * std::pow((r - config_.r0_um) / 1000.0, config_.c2);
  }

  double sweep_rate(double r) const {
    if (r <= config_.r0_um) return 0.0;
    return c1_rad_ * config_.c2 * std::pow((r - config_.r0_um) / 1000.0, config_.c2 - 1.0) / 1000.0;
  }

  Point snap(const Point& p) const {
    const double q = config_.lattice_um;
    if (q == 0.0) return p;
    const double x = std::round(p.x() / q) * q;
    double y = std::round(p.y() / q) * q;
    // keep off-meridian vertices on their own side of the raphe
    if (y == 0.0 && p.y() != 0.0) y = std::copysign(q, p.y());
    return {x, y};
  }

  // Somata exactly on y = 0 are fixed points of the bundle family.
  std::vector<Point> meridian_path(const Point& soma, const RetinalCoordinateFrame& frame) const {
    const double direction = soma.x() < frame.optic_disc_center.x() ? 1.0 : -1.0;
    const double boundary = frame.optic_disc_center.x() - direction * frame.optic_disc_radius_um;
    const double h = walk_step_;
    std::vector<Point> path{soma};
    double x = soma.x();
    while (true) {
      const double remaining = std::abs(boundary - x);
      if (remaining <= h) {
        path.emplace_back(boundary, 0.0);
        break;
      }
      const double dx = remaining < 1.5 * h ? 0.5 * remaining : h;
      x += direction * dx;
      path.emplace_back(x, 0.0);
    }
    return path;
  }

  std::vector<Point> fan_path(const Point& soma, const RetinalCoordinateFrame& frame) const {
    const Point& disc = frame.optic_disc_center;
    const double disc_radius = frame.optic_disc_radius_um;
    const Point rel = soma - disc;
    const double r_soma = rel.norm();
    const double side = rel.y() > 0.0 ? 1.0 : -1.0;
    const double angle_soma = std::atan2(std::abs(rel.y()), rel.x());
    const double angle_exit = angle_soma - sweep(r_soma);
    if (angle_exit < 0.0) {
      throw Error(ErrorCode::OutOfExtent, "soma lies outside the region covered by the bundle model");
    }
    auto at = [&](double r) {
      const double a = angle_exit + sweep(r);
      return Point(disc.x() + r * std::cos(a), disc.y() + side * r * std::sin(a));
    };

    const double h = walk_step_;
    std::vector<Point> path{soma};
    double r = r_soma;
    while (true) {
      const Point& prev = path.back();
      const Point end = at(disc_radius);
      if ((end - prev).norm() <= h) {
        path.push_back(end);
        break;
      }
      const double speed = std::hypot(1.0, r * sweep_rate(r));
      double dr = h / speed;
      if (r - 1.5 * dr < disc_radius) dr = 0.5 * (r - disc_radius);
      Point next = at(r - dr);
      for (int iter = 0; iter < 60; ++iter) {
        const double chord = (next - prev).norm();
        if (chord <= h) break;
        dr *= 0.999 * h / chord;
        next = at(r - dr);
      }
      r -= dr;
      path.push_back(next);
    }
    return path;
  }

  BundleModelConfig config_;
  double c1_rad_ = 0.0;
  double walk_step_ = 0.0;
};

}  // namespace

std::unique_ptr<BundleModel> make_bundle_model(const BundleModelConfig& config) {
  config.validate();
  return std::make_unique<SpiralFanModel>(config);
}

AxonBundle trace_bundle(const Point& soma, const RetinalCoordinateFrame& frame, const BundleModelConfig& config) {
  return make_bundle_model(config)->trace(soma, frame);
}

std::string PerceptGrid::identity() const {
  std::ostringstream id;
  id.precision(17);
  id << width << 'x' << height << '@' << extent.x_min << ',' << extent.x_max << ',' << extent.y_min << ','
     << extent.y_max << "|disc=" << frame.optic_disc_center.x() << ',' << frame.optic_disc_center.y() << ','
     << frame.optic_disc_radius_um;
  return id.str();
}

PerceptGrid build_percept_grid(const RetinalCoordinateFrame& frame, int width, int height, const Extent& extent) {
  frame.validate();
  if (width < 2 || height < 2) throw Error(ErrorCode::BadExtent, "percept grid needs at least 2 pixels per axis");
  if (!(extent.x_min < extent.x_max) || !(extent.y_min < extent.y_max)) {
    throw Error(ErrorCode::BadExtent, "percept extent is empty or inverted");
  }
  const double limit = frame.half_extent_um;
  if (std::abs(extent.x_min) > limit || std::abs(extent.x_max) > limit || std::abs(extent.y_min) > limit ||
      std::abs(extent.y_max) > limit) {
    throw Error(ErrorCode::BadExtent, "percept extent exceeds the modeled retina");
  }
  PerceptGrid grid;
  grid.frame = frame;
  grid.width = width;
  grid.height = height;
  grid.extent = extent;
  grid.xs.resize(width);
  grid.ys.resize(height);
  for (int j = 0; j < width; ++j) {
    grid.xs(j) = extent.x_min + (extent.x_max - extent.x_min) * j / (width - 1);
  }
  for (int i = 0; i < height; ++i) {
    grid.ys(i) = extent.y_max - (extent.y_max - extent.y_min) * i / (height - 1);
  }
  grid.xs(width - 1) = extent.x_max;
  grid.ys(height - 1) = extent.y_min;
  return grid;
}

PerceptGrid default_percept_grid(int width, int height) {
  return build_percept_grid(RetinalCoordinateFrame{}, width, height, Extent{});
}

}  // namespace phosphor
