// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used by the tests. Kept deliberately
// naive: different algorithms from the library wherever practical.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace oracle {

inline double arc_length(const std::vector<Eigen::Vector2d>& points, std::size_t upto) {
  long double total = 0.0L;
  for (std::size_t i = 1; i <= upto; ++i) {
    const long double dx = points[i].x() - points[i - 1].x();
    const long double dy = points[i].y() - points[i - 1].y();
    total += std::sqrt(dx * dx + dy * dy);
  }
  return static_cast<double>(total);
}

inline long double normal_cdf(long double z) { return 0.5L * std::erfc(-z / std::sqrt(2.0L)); }

/// Quantile by bisection on the long-double CDF.
inline double normal_quantile(double p) {
  long double lo = -40.0L, hi = 40.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

/// Linear-interpolation percentile via nth_element.
inline double percentile(std::vector<double> v, double q) {
  const double h = (v.size() - 1) * q / 100.0;
  const auto k = static_cast<std::size_t>(h);
  std::nth_element(v.begin(), v.begin() + k, v.end());
  const double lower = v[k];
  if (k + 1 >= v.size()) return lower;
  const double upper = *std::min_element(v.begin() + k + 1, v.end());
  return lower + (h - k) * (upper - lower);
}

/// Benjamini-Hochberg in O(m^2): each p's adjusted value is the minimum of
/// m p_(j) / j over all ranks j at or after its own.
inline std::vector<double> benjamini_hochberg(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    double best = 1.0;
    for (std::size_t j = r; j < m; ++j) best = std::min(best, m * p[idx[j]] / (j + 1));
    out[idx[r]] = best;
  }
  return out;
}

/// Road/sidewalk boundary by scanning neighbouring pairs.
template <typename Labels>
Labels boundary(const Labels& labels) {
  Labels out = Labels::Zero(labels.rows(), labels.cols());
  auto mark = [&](Eigen::Index r, Eigen::Index c) {
    if (labels(r, c) == 10 || labels(r, c) == 11) out(r, c) = 255;
  };
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    for (Eigen::Index c = 0; c < labels.cols(); ++c) {
      if (c + 1 < labels.cols() && labels(r, c) != labels(r, c + 1)) {
        mark(r, c);
        mark(r, c + 1);
      }
      if (r + 1 < labels.rows() && labels(r, c) != labels(r + 1, c)) {
        mark(r, c);
        mark(r + 1, c);
      }
    }
  }
  return out;
}

/// Box averaging by replicating every source pixel rows x cols times and
/// taking plain block means.
template <typename Gray>
Eigen::ArrayXXd box_average(const Gray& gray, int rows, int cols) {
  const Eigen::Index h = gray.rows(), w = gray.cols();
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(rows, cols);
  for (Eigen::Index y = 0; y < h * rows; ++y) {
    for (Eigen::Index x = 0; x < w * cols; ++x) {
      out(y / h, x / w) += gray(y / rows, x / cols);
    }
  }
  return out / static_cast<double>(h * w);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("phosphor-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
