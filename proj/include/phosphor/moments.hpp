// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "phosphor/error.hpp"
#include "phosphor/retina.hpp"

namespace phosphor {

/// Second-moment ellipse of a non-negative intensity pattern in retinal
/// coordinates.
struct MomentEllipse {
  double mass = 0.0;
  Point centroid{0.0, 0.0};
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double major_sigma = 0.0;
  double minor_sigma = 0.0;
  /// Direction of the major axis in degrees, in [0, 180), counter-clockwise
  /// from +x (nasal).
  double orientation_deg = 0.0;

  double axis_ratio() const { return major_sigma / minor_sigma; }
  /// Geometric-mean width; equals rho for an isotropic Gaussian.
  double sigma() const { return std::sqrt(major_sigma * minor_sigma); }
};

template <typename Derived>
MomentEllipse moment_ellipse(const Eigen::ArrayBase<Derived>& weights, const PerceptGrid& grid) {
  if (weights.rows() != grid.height || weights.cols() != grid.width) {
    throw Error(ErrorCode::ShapeMismatch, "weights do not match the percept grid");
  }
  MomentEllipse out;
  double sx = 0.0, sy = 0.0;
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      const double w = weights(r, c);
      out.mass += w;
      sx += w * grid.xs(c);
      sy += w * grid.ys(r);
    }
  }
  if (!(out.mass > 0.0)) throw Error(ErrorCode::InvalidArgument, "moment ellipse of an empty pattern");
  out.centroid = {sx / out.mass, sy / out.mass};

  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      const Point d = Point(grid.xs(c), grid.ys(r)) - out.centroid;
      cov.noalias() += weights(r, c) * d * d.transpose();
    }
  }
  out.covariance = cov / out.mass;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(out.covariance);
  out.minor_sigma = std::sqrt(std::max(0.0, eig.eigenvalues()(0)));
  out.major_sigma = std::sqrt(std::max(0.0, eig.eigenvalues()(1)));
  const Eigen::Vector2d axis = eig.eigenvectors().col(1);
  double deg = std::atan2(axis.y(), axis.x()) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 180.0;
  if (deg >= 180.0) deg -= 180.0;
  out.orientation_deg = deg;
  return out;
}

/// Smallest angle between two undirected axes, in degrees.
inline double axis_angle_difference(double a_deg, double b_deg) {
  double d = std::fmod(std::abs(a_deg - b_deg), 180.0);
  return d > 90.0 ? 180.0 - d : d;
}

}  // namespace phosphor
