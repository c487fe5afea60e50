// SPDX-License-Identifier: Apache-2.0
#include "phosphor/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "phosphor/error.hpp"

namespace phosphor {

ElectrodeGrid ElectrodeGrid::square(int n, double span_um) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "electrode grid needs at least 2 electrodes per side");
  ElectrodeGrid grid;
  grid.rows = n;
  grid.cols = n;
  grid.pitch_um = span_um / (n - 1);
  return grid;
}

void ElectrodeGrid::validate() const {
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidArgument, "electrode grid must be non-empty");
  if (!(pitch_um > 0.0)) throw Error(ErrorCode::InvalidArgument, "electrode pitch must be positive");
}

bool ElectrodeGrid::standard_size() const {
  auto ok = [](int n) { return n == 8 || n == 16 || n == 32; };
  return rows == cols && ok(rows);
}

std::vector<Point> ElectrodeGrid::positions() const {
  std::vector<Point> out;
  out.reserve(size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out.push_back(position(r, c));
  }
  return out;
}

double axon_weight(double path_length, double lambda_um, DecayForm form) {
  if (lambda_um == 0.0) return path_length == 0.0 ? 1.0 : 0.0;
  return decay_factor(path_length, lambda_um, form);
}

namespace {

void check_amplitudes(const AmplitudeFrame& amps, const ElectrodeGrid& grid) {
  if (amps.values.rows() != grid.rows || amps.values.cols() != grid.cols) {
    throw Error(ErrorCode::ShapeMismatch, "amplitude frame is " + std::to_string(amps.values.rows()) + "x" +
                                              std::to_string(amps.values.cols()) + ", grid is " +
                                              std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  }
  if (amps.values.size() > 0 && (!(amps.values.minCoeff() >= 0.0) || !(amps.values.maxCoeff() <= 1.0))) {
    throw Error(ErrorCode::InvalidArgument, "amplitudes must lie in [0, 1]");
  }
}

}  // namespace

PerceptFrame render_oracle(const AmplitudeFrame& amps, const ElectrodeGrid& grid, const AxonMapParams& params,
                           const PerceptGrid& percept, const BundleModelConfig& bundles) {
  grid.validate();
  params.validate();
  check_amplitudes(amps, grid);
  const auto model = make_bundle_model(bundles);
  const std::vector<Point> electrodes = grid.positions();
  const ImageD& a = amps.values;

  PerceptFrame out;
  out.grid_id = percept.identity();
  out.frame_index = amps.frame_index;
  out.brightness = ImageD::Zero(percept.height, percept.width);
  for (int i = 0; i < percept.height; ++i) {
    for (int j = 0; j < percept.width; ++j) {
      const Point soma = percept.soma(i, j);
      if (percept.frame.inside_disc(soma)) continue;
      const AxonBundle bundle = model->trace(soma, percept.frame);
      double best = 0.0;
      for (std::size_t k = 0; k < bundle.size(); ++k) {
        const double axonal = axon_weight(bundle.cumulative_path_length[k], params.lambda_um, params.decay);
        if (axonal == 0.0) continue;
        double spatial = 0.0;
        for (std::size_t e = 0; e < electrodes.size(); ++e) {
          const double amp = a(static_cast<Eigen::Index>(e) / grid.cols, static_cast<Eigen::Index>(e) % grid.cols);
          if (amp == 0.0) continue;
          spatial += amp * decay_factor((bundle.segments[k] - electrodes[e]).norm(), params.rho_um, params.decay);
        }
        best = std::max(best, axonal * spatial);
      }
      out.brightness(i, j) = std::min(1.0, best);
    }
  }
  return out;
}

std::vector<SensitivityTable::Entry> SensitivityTable::entries(std::size_t pixel) const {
  std::vector<Entry> out;
  for (std::size_t k = 0; k < entry_count(pixel); ++k) out.push_back({entry_position(pixel, k), weight_[offset_[pixel] + k]});
  return out;
}

Point SensitivityTable::entry_position(std::size_t pixel, std::size_t k) const {
  if (k == 0) {
    const int row = static_cast<int>(pixel / percept_.width);
    const int col = static_cast<int>(pixel % percept_.width);
    return percept_.soma(row, col);
  }
  const std::size_t at = offset_[pixel] + k;
  if (!on_lattice()) return position_[at];
  const std::int64_t node = node_[at];
  const double ix = static_cast<double>(node_x0_ + (node & kNodeMask));
  const double iy = static_cast<double>(node_y0_ + (node >> kNodeShift));
  return {ix * lattice_pitch_, iy * lattice_pitch_};
}

SensitivityTable build_sensitivity_table(const PerceptGrid& percept, const AxonMapParams& params,
                                         const BundleModelConfig& bundles, double w_min) {
  params.validate();
  if (!(w_min > 0.0 && w_min <= 0.1)) throw Error(ErrorCode::InvalidArgument, "w_min must lie in (0, 0.1]");
  const auto model = make_bundle_model(bundles);

  SensitivityTable table;
  table.percept_ = percept;
  table.lambda_um_ = params.lambda_um;
  table.decay_ = params.decay;
  table.bundles_ = bundles;
  table.w_min_ = w_min;
  table.lattice_pitch_ = bundles.lattice_um;

  const bool lattice = bundles.lattice_um > 0.0;
  std::vector<std::array<std::int64_t, 2>> cells;
  table.offset_.reserve(percept.pixel_count() + 1);
  table.offset_.push_back(0);
  for (int i = 0; i < percept.height; ++i) {
    for (int j = 0; j < percept.width; ++j) {
      const Point soma = percept.soma(i, j);
      if (!percept.frame.inside_disc(soma)) {
        const AxonBundle bundle = model->trace(soma, percept.frame);
        table.weight_.push_back(1.0);
        if (lattice) {
          cells.push_back({0, 0});
        } else {
          table.position_.push_back(soma);
        }
        if (params.lambda_um > 0.0) {
          // weights fall monotonically along the bundle
          for (std::size_t k = 1; k < bundle.size(); ++k) {
            const double w = axon_weight(bundle.cumulative_path_length[k], params.lambda_um, params.decay);
            if (w < w_min) break;
            table.weight_.push_back(w);
            const Point& p = bundle.segments[k];
            if (lattice) {
              cells.push_back({std::llround(p.x() / bundles.lattice_um), std::llround(p.y() / bundles.lattice_um)});
            } else {
              table.position_.push_back(p);
            }
          }
        }
      }
      table.offset_.push_back(table.weight_.size());
    }
  }

  if (lattice) {
    std::int64_t x_lo = std::numeric_limits<std::int64_t>::max(), x_hi = std::numeric_limits<std::int64_t>::min();
    std::int64_t y_lo = x_lo, y_hi = x_hi;
    for (std::size_t p = 0; p + 1 < table.offset_.size(); ++p) {
      for (std::size_t at = table.offset_[p] + 1; at < table.offset_[p + 1]; ++at) {
        x_lo = std::min(x_lo, cells[at][0]);
        x_hi = std::max(x_hi, cells[at][0]);
        y_lo = std::min(y_lo, cells[at][1]);
        y_hi = std::max(y_hi, cells[at][1]);
      }
    }
    if (x_lo > x_hi) {
      x_lo = x_hi = y_lo = y_hi = 0;
    }
    table.node_x0_ = x_lo;
    table.node_y0_ = y_lo;
    table.node_nx_ = x_hi - x_lo + 1;
    table.node_ny_ = y_hi - y_lo + 1;
    if (table.node_nx_ > SensitivityTable::kNodeMask + 1 || table.node_ny_ > (std::int64_t{1} << 15)) {
      throw Error(ErrorCode::InvalidArgument, "bundle lattice too fine for the percept extent");
    }
    table.node_.resize(cells.size(), -1);
    for (std::size_t p = 0; p + 1 < table.offset_.size(); ++p) {
      for (std::size_t at = table.offset_[p] + 1; at < table.offset_[p + 1]; ++at) {
        table.node_[at] = static_cast<std::int32_t>(((cells[at][1] - y_lo) << SensitivityTable::kNodeShift) |
                                                    (cells[at][0] - x_lo));
      }
    }
    auto block = [&](std::size_t at) {
      const std::int64_t node = table.node_[at];
      return std::pair((node >> SensitivityTable::kNodeShift) >> SensitivityTable::kBlockShift,
                       (node & SensitivityTable::kNodeMask) >> SensitivityTable::kBlockShift);
    };
    table.run_.assign(cells.size(), 1);
    for (std::size_t p = 0; p + 1 < table.offset_.size(); ++p) {
      const std::size_t begin = table.offset_[p] + 1, end = table.offset_[p + 1];
      for (std::size_t at = end; at-- > begin;) {
        if (at + 1 < end && block(at) == block(at + 1) && table.run_[at + 1] < 0xFFFF) {
          table.run_[at] = static_cast<std::uint16_t>(table.run_[at + 1] + 1);
        }
      }
    }
  }
  return table;
}

namespace {

// Gaussian factor matrix K(i, e) = exp(-(coord_i - electrode_e)^2 / (2 rho^2)).
template <typename Coords, typename Electrode>
Eigen::MatrixXd gaussian_factors(const Coords& coords, Eigen::Index count, const Electrode& electrode,
                                 Eigen::Index electrodes, double rho) {
  Eigen::MatrixXd k(count, electrodes);
  const double inv = 1.0 / (2.0 * rho * rho);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double c = coords(i);
    for (Eigen::Index e = 0; e < electrodes; ++e) {
      const double d = c - electrode(e);
      k(i, e) = std::exp(-d * d * inv);
    }
  }
  return k;
}

}  // namespace

FastRenderer::FastRenderer(const SensitivityTable& table, const ElectrodeGrid& grid, const AxonMapParams& params)
    : table_(&table), grid_(grid), params_(params) {
  grid_.validate();
  params_.validate();
  if (params_.lambda_um != table.lambda_um() || params_.decay != table.decay()) {
    throw Error(ErrorCode::TableMismatch, "sensitivity table was built for different axon-map parameters");
  }
  electrodes_ = grid_.positions();
  separable_ = params_.decay == DecayForm::Gaussian;
  if (!separable_) return;

  const PerceptGrid& percept = table.percept();
  auto ex = [&](Eigen::Index c) { return grid_.x(static_cast<int>(c)); };
  auto ey = [&](Eigen::Index r) { return grid_.y(static_cast<int>(r)); };
  pixel_kx_ = gaussian_factors(percept.xs, percept.width, ex, grid_.cols, params_.rho_um);
  pixel_ky_ = gaussian_factors(percept.ys, percept.height, ey, grid_.rows, params_.rho_um);
  if (table.on_lattice() && table.entry_count() > 0) {
    const double q = table.lattice_pitch_;
    auto nx = [&](Eigen::Index i) { return static_cast<double>(table.node_x0_ + i) * q; };
    auto ny = [&](Eigen::Index i) { return static_cast<double>(table.node_y0_ + i) * q; };
    node_kx_ = gaussian_factors(nx, table.node_nx_, ex, grid_.cols, params_.rho_um);
    node_ky_ = gaussian_factors(ny, table.node_ny_, ey, grid_.rows, params_.rho_um);
  }
}

double FastRenderer::direct_field(const Point& p, const ImageD& amps) const {
  double sum = 0.0;
  for (std::size_t e = 0; e < electrodes_.size(); ++e) {
    const double amp = amps(static_cast<Eigen::Index>(e) / grid_.cols, static_cast<Eigen::Index>(e) % grid_.cols);
    if (amp != 0.0) sum += amp * decay_factor((p - electrodes_[e]).norm(), params_.rho_um, params_.decay);
  }
  return sum;
}

PerceptFrame FastRenderer::render(const AmplitudeFrame& amps) const {
  check_amplitudes(amps, grid_);
  const SensitivityTable& table = *table_;
  const PerceptGrid& percept = table.percept();
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::MatrixXd a = amps.values.matrix();

  PerceptFrame out;
  out.grid_id = percept.identity();
  out.frame_index = amps.frame_index;
  out.brightness = ImageD::Zero(percept.height, percept.width);

  const bool lattice = separable_ && table.on_lattice() && node_kx_.size() > 0;
  RowMatrix soma_field;
  Eigen::MatrixXd across;  // electrode row x lattice column, one column per node x
  RowMatrix block_bound;
  Eigen::Index blocks_x = 0;
  double upper = a.sum();  // kernels never exceed 1
  if (separable_) {
    soma_field.noalias() = pixel_ky_ * a * pixel_kx_.transpose();
    if (lattice) {
      across.noalias() = a * node_kx_.transpose();
      // The lattice field is evaluated lazily below; bound it by taking the
      // largest value of each electrode row independently.
      const Eigen::VectorXd row_max = across.rowwise().maxCoeff();
      upper = std::min(upper, (node_ky_ * row_max).maxCoeff());

      // The same bound per block of nodes lets whole runs of entries be skipped.
      constexpr int shift = SensitivityTable::kBlockShift;
      const Eigen::Index side = Eigen::Index{1} << shift;
      blocks_x = (table.node_nx_ + side - 1) >> shift;
      const Eigen::Index blocks_y = (table.node_ny_ + side - 1) >> shift;
      Eigen::MatrixXd across_max(a.rows(), blocks_x);
      for (Eigen::Index b = 0; b < blocks_x; ++b) {
        const Eigen::Index first = b * side, count = std::min<Eigen::Index>(side, table.node_nx_ - first);
        across_max.col(b) = across.middleCols(first, count).rowwise().maxCoeff();
      }
      RowMatrix ky_max(blocks_y, a.rows());
      for (Eigen::Index b = 0; b < blocks_y; ++b) {
        const Eigen::Index first = b * side, count = std::min<Eigen::Index>(side, table.node_ny_ - first);
        ky_max.row(b) = node_ky_.middleRows(first, count).colwise().maxCoeff();
      }
      block_bound.noalias() = ky_max * across_max;
    }
  }
  const Eigen::Index rows = a.rows();
  auto node_value = [&](std::int32_t node) {
    const double* ky = node_ky_.data() + static_cast<Eigen::Index>(node >> SensitivityTable::kNodeShift) * rows;
    const double* ax = across.data() + static_cast<Eigen::Index>(node & SensitivityTable::kNodeMask) * rows;
    double sum = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) sum += ky[r] * ax[r];
    return sum;
  };

  for (int i = 0; i < percept.height; ++i) {
    for (int j = 0; j < percept.width; ++j) {
      const std::size_t pixel = static_cast<std::size_t>(i) * percept.width + j;
      const std::size_t begin = table.offset_[pixel];
      const std::size_t end = table.offset_[pixel + 1];
      if (begin == end) continue;
      double best = separable_ ? soma_field(i, j) : direct_field(percept.soma(i, j), amps.values);
      // Entries are sorted by weight, so once w * upper cannot beat the
      // running maximum no later entry can either.
      if (lattice) {
        for (std::size_t at = begin + 1; at < end && best < 1.0;) {
          const double w = table.weight_[at];
          if (w * upper <= best) break;
          const std::int32_t node = table.node_[at];
          const double bound = block_bound((node >> SensitivityTable::kNodeShift) >> SensitivityTable::kBlockShift,
                                           (node & SensitivityTable::kNodeMask) >> SensitivityTable::kBlockShift);
          const std::size_t stop = at + table.run_[at];
          if (w * bound <= best) {
            at = stop;
            continue;
          }
          for (; at < stop; ++at) best = std::max(best, table.weight_[at] * node_value(table.node_[at]));
        }
      } else {
        for (std::size_t at = begin + 1; at < end && best < 1.0; ++at) {
          const double w = table.weight_[at];
          if (w * upper <= best) break;
          best = std::max(best, w * direct_field(table.entry_position(pixel, at - begin), amps.values));
        }
      }
      out.brightness(i, j) = std::min(1.0, best);
    }
  }
  return out;
}

PerceptFrame render_fast(const AmplitudeFrame& amps, const ElectrodeGrid& grid, const AxonMapParams& params,
                         const SensitivityTable& table) {
  return FastRenderer(table, grid, params).render(amps);
}

std::vector<PerceptFrame> render_video(std::span<const AmplitudeFrame> frames, const FastRenderer& renderer) {
  std::vector<PerceptFrame> out;
  out.reserve(frames.size());
  for (const AmplitudeFrame& frame : frames) {
    if (frame.values.rows() != frames.front().values.rows() || frame.values.cols() != frames.front().values.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "video frames differ in shape");
    }
    out.push_back(renderer.render(frame));
  }
  return out;
}

}  // namespace phosphor
