// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phosphor/image.hpp"
#include "phosphor/retina.hpp"

namespace phosphor {

/// Rectangular electrode array; positions are row-major with row 0 at the
/// superior edge, matching image row order.
struct ElectrodeGrid {
  int rows = 0;
  int cols = 0;
  double pitch_um = 0.0;
  Point center{0.0, 0.0};

  /// n x n grid spanning `span_um` on a side, centered on the fovea.
  static ElectrodeGrid square(int n, double span_um = 6000.0);

  void validate() const;
  /// True for the 8x8, 16x16 and 32x32 arrays used in the experiments.
  bool standard_size() const;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }

  double x(int col) const { return center.x() + (col - 0.5 * (cols - 1)) * pitch_um; }
  double y(int row) const { return center.y() + (0.5 * (rows - 1) - row) * pitch_um; }
  Point position(int row, int col) const { return {x(col), y(row)}; }
  std::vector<Point> positions() const;

  bool operator==(const ElectrodeGrid&) const = default;
};

/// Normalized current amplitudes in [0, 1], rows x cols.
struct AmplitudeFrame {
  ImageD values;
  int frame_index = 0;
  double timestamp_ms = 0.0;
};

/// Rendered brightness in [0, 1], height x width of its PerceptGrid.
struct PerceptFrame {
  ImageD brightness;
  std::string grid_id;
  int frame_index = 0;
};

/// Per-pixel list of axon samples whose axonal weight reaches w_min, sorted
/// by descending weight. Built once per (percept grid, lambda, bundle model)
/// and shared read-only between renders.
class SensitivityTable {
 public:
  struct Entry {
    Point position;
    double weight;
  };

  const PerceptGrid& percept() const { return percept_; }
  double lambda_um() const { return lambda_um_; }
  DecayForm decay() const { return decay_; }
  const BundleModelConfig& bundles() const { return bundles_; }
  double w_min() const { return w_min_; }

  std::size_t entry_count() const { return weight_.size(); }
  std::size_t entry_count(std::size_t pixel) const { return offset_[pixel + 1] - offset_[pixel]; }
  /// Pixels inside the optic disc carry no entries.
  bool blind(std::size_t pixel) const { return entry_count(pixel) == 0; }
  std::vector<Entry> entries(std::size_t pixel) const;

  /// True when every non-soma entry lies on the bundle model's lattice.
  bool on_lattice() const { return lattice_pitch_ > 0.0; }

 private:
  friend SensitivityTable build_sensitivity_table(const PerceptGrid&, const AxonMapParams&,
                                                  const BundleModelConfig&, double);
  friend class FastRenderer;

  Point entry_position(std::size_t pixel, std::size_t k) const;

  PerceptGrid percept_;
  double lambda_um_ = 0.0;
  DecayForm decay_ = DecayForm::Gaussian;
  BundleModelConfig bundles_;
  double w_min_ = 0.0;

  // CSR layout; entry k of pixel p lives at offset_[p] + k. The first entry
  // of a non-blind pixel is its soma (node_ == -1).
  std::vector<std::size_t> offset_;
  std::vector<double> weight_;
  std::vector<std::int32_t> node_;
  std::vector<Point> position_;  // only filled off-lattice

  // Lattice nodes are packed as (row << 16) | column relative to the origin.
  static constexpr int kNodeShift = 16;
  static constexpr std::int64_t kNodeMask = (std::int64_t{1} << kNodeShift) - 1;
  // Nodes are grouped into square blocks of 2^kBlockShift nodes per side;
  // run_[at] counts the consecutive entries from `at` in the same block.
  static constexpr int kBlockShift = 4;
  std::vector<std::uint16_t> run_;

  double lattice_pitch_ = 0.0;
  std::int64_t node_x0_ = 0;
  std::int64_t node_y0_ = 0;
  std::int64_t node_nx_ = 0;
  std::int64_t node_ny_ = 0;
};

/// Axonal weight of a sample at path length `path_length` from its soma.
/// lambda = 0 keeps only the soma itself.
double axon_weight(double path_length, double lambda_um, DecayForm form);

/// Brute-force axon-map rendering:
///   b(p) = clip01( max_seg w(l_seg) * sum_e a_e * K(|seg - e|) )
/// with every bundle segment and every electrode evaluated.
PerceptFrame render_oracle(const AmplitudeFrame& amps, const ElectrodeGrid& grid, const AxonMapParams& params,
                           const PerceptGrid& percept, const BundleModelConfig& bundles);

/// w_min must lie in (0, 0.1].
SensitivityTable build_sensitivity_table(const PerceptGrid& percept, const AxonMapParams& params,
                                         const BundleModelConfig& bundles, double w_min = 1e-3);

/// Caches the electrode-to-lattice kernels for one (table, grid, params)
/// combination so a video can be rendered frame after frame.
class FastRenderer {
 public:
  FastRenderer(const SensitivityTable& table, const ElectrodeGrid& grid, const AxonMapParams& params);

  PerceptFrame render(const AmplitudeFrame& amps) const;

  const SensitivityTable& table() const { return *table_; }
  const ElectrodeGrid& grid() const { return grid_; }
  const AxonMapParams& params() const { return params_; }

 private:
  double direct_field(const Point& p, const ImageD& amps) const;

  const SensitivityTable* table_;
  ElectrodeGrid grid_;
  AxonMapParams params_;
  bool separable_ = false;
  // Gaussian factors, (lattice or pixel coordinate) x (electrode column/row).
  Eigen::MatrixXd node_kx_, pixel_kx_, pixel_ky_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> node_ky_;
  std::vector<Point> electrodes_;
};

/// Throws Error(TableMismatch) when the table was built for another lambda
/// or decay form, Error(ShapeMismatch) when amps and grid disagree.
PerceptFrame render_fast(const AmplitudeFrame& amps, const ElectrodeGrid& grid, const AxonMapParams& params,
                         const SensitivityTable& table);

/// Frames are rendered independently; the model has no temporal state.
std::vector<PerceptFrame> render_video(std::span<const AmplitudeFrame> frames, const FastRenderer& renderer);

}  // namespace phosphor
