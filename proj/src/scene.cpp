// SPDX-License-Identifier: Apache-2.0
#include "phosphor/scene.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "phosphor/error.hpp"

namespace phosphor {

void VideoFrame::validate() const {
  if (planes.size() != 1 && planes.size() != 3) {
    throw Error(ErrorCode::InvalidArgument, "video frame needs 1 or 3 planes");
  }
  for (const ImageU8& plane : planes) {
    if (plane.rows() != rows() || plane.cols() != cols()) throw Error(ErrorCode::ShapeMismatch, "plane shapes differ");
  }
  if (rows() < 32 || cols() < 32) throw Error(ErrorCode::InvalidArgument, "video frames must be at least 32x32");
}

ImageD VideoFrame::gray() const {
  if (planes.size() == 1) return planes[0].cast<double>();
  if (planes.size() != 3) throw Error(ErrorCode::InvalidArgument, "video frame needs 1 or 3 planes");
  return 0.299 * planes[0].cast<double>() + 0.587 * planes[1].cast<double>() + 0.114 * planes[2].cast<double>();
}

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::Saliency: return "saliency";
    case Strategy::Depth: return "depth";
    case Strategy::Segmentation: return "segmentation";
    case Strategy::Combination: return "combination";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kStrategies) {
    if (strategy_name(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

double percentile(const ImageD& values, double q) {
  if (values.size() == 0) throw Error(ErrorCode::InvalidArgument, "percentile of an empty map");
  if (!(q >= 0.0 && q <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile must lie in [0, 100]");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

template <typename Map>
const Map& require(const std::optional<Map>& map, const VideoFrame& frame, const char* name) {
  if (!map) throw Error(ErrorCode::MissingAuxMap, std::string(name) + " map is required");
  if (!frame.planes.empty() && (map->rows() != frame.rows() || map->cols() != frame.cols())) {
    throw Error(ErrorCode::ShapeMismatch, std::string(name) + " map does not match the frame shape");
  }
  if (map->size() == 0) throw Error(ErrorCode::InvalidArgument, std::string(name) + " map is empty");
  return *map;
}

const ImageD& require_saliency(const VideoFrame& frame, const AuxMaps& aux) {
  const ImageD& s = require(aux.saliency, frame, "saliency");
  if (!(s.minCoeff() >= 0.0 && s.maxCoeff() <= 1.0)) throw Error(ErrorCode::InvalidArgument, "saliency must lie in [0, 1]");
  return s;
}

const ImageI& require_labels(const VideoFrame& frame, const AuxMaps& aux) {
  const ImageI& l = require(aux.labels, frame, "labels");
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (!label::is_known(l.data()[i])) {
      throw Error(ErrorCode::InvalidArgument, "unknown label id " + std::to_string(l.data()[i]));
    }
  }
  return l;
}

const ImageD& require_depth(const VideoFrame& frame, const AuxMaps& aux) {
  const ImageD& d = require(aux.depth, frame, "depth");
  if (!d.allFinite()) throw Error(ErrorCode::InvalidArgument, "depth map has non-finite values");
  return d;
}

}  // namespace

GrayFrame strategy_saliency(const VideoFrame& frame, const AuxMaps& aux) {
  const ImageD& s = require_saliency(frame, aux);
  return {255.0 * s, Strategy::Saliency, frame.frame_index, false};
}

GrayFrame strategy_depth(const VideoFrame& frame, const AuxMaps& aux, double decay_rate) {
  if (!(decay_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "decay_rate must be positive");
  const ImageD& depth = require_depth(frame, aux);
  const double d_min = depth.minCoeff();
  const double d_cut = percentile(depth, 80.0);

  GrayFrame out{ImageD::Zero(depth.rows(), depth.cols()), Strategy::Depth, frame.frame_index, d_cut == d_min};
  const double floor = std::exp(-decay_rate);
  for (Eigen::Index i = 0; i < depth.size(); ++i) {
    const double d = depth.data()[i];
    if (d > d_cut) continue;
    if (out.degenerate_depth) {
      out.pixels.data()[i] = 180.0;
      continue;
    }
    const double t = (d - d_min) / (d_cut - d_min);
    out.pixels.data()[i] = std::clamp(180.0 * (std::exp(-decay_rate * t) - floor) / (1.0 - floor), 0.0, 180.0);
  }
  return out;
}

GrayFrame strategy_segmentation(const VideoFrame& frame, const AuxMaps& aux) {
  const ImageI& labels = require_labels(frame, aux);
  const Eigen::Index rows = labels.rows(), cols = labels.cols();
  GrayFrame out{ImageD::Zero(rows, cols), Strategy::Segmentation, frame.frame_index, false};

  const bool objects = labels.unaryExpr([](int id) { return label::is_object(id); }).any();
  if (objects) {
    out.pixels = labels.unaryExpr([](int id) { return label::is_object(id) ? 255.0 : 0.0; });
    return out;
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const int id = labels(r, c);
      if (id != label::road && id != label::sidewalk) continue;
      const bool edge = (r > 0 && labels(r - 1, c) != id) || (r + 1 < rows && labels(r + 1, c) != id) ||
                        (c > 0 && labels(r, c - 1) != id) || (c + 1 < cols && labels(r, c + 1) != id);
      if (edge) out.pixels(r, c) = 255.0;
    }
  }
  return out;
}

double combination_curve(double depth, double d_min, double d_max, CombinationMode mode) {
  const double range = d_max - d_min;
  if (range == 0.0) return 180.0;
  if (mode == CombinationMode::Normalized) {
    const double t = (depth - d_min) / range;
    return 180.0 * (1.0 - t * t);
  }
  const double u = 8.0 / range * depth - 16.0 / range;
  return -45.0 / 16.0 * u * u + 180.0;
}

Image<bool> salient_mask(const ImageD& saliency, double top_percent) {
  const double threshold = percentile(saliency, 100.0 - top_percent);
  return saliency >= threshold;
}

GrayFrame strategy_combination(const VideoFrame& frame, const AuxMaps& aux, CombinationMode mode) {
  const ImageD& saliency = require_saliency(frame, aux);
  const ImageD& depth = require_depth(frame, aux);
  const ImageI& labels = require_labels(frame, aux);
  if (saliency.rows() != depth.rows() || saliency.cols() != depth.cols() || labels.rows() != depth.rows() ||
      labels.cols() != depth.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "auxiliary maps differ in shape");
  }
  const Image<bool> mask = salient_mask(saliency) || labels.unaryExpr([](int id) { return label::is_object(id); });
  const double d_min = depth.minCoeff();
  const double d_max = depth.maxCoeff();

  GrayFrame out{ImageD::Zero(depth.rows(), depth.cols()), Strategy::Combination, frame.frame_index, false};
  for (Eigen::Index i = 0; i < depth.size(); ++i) {
    if (!mask.data()[i]) continue;
    out.pixels.data()[i] = std::clamp(combination_curve(depth.data()[i], d_min, d_max, mode), 0.0, 180.0);
  }
  return out;
}

GrayFrame apply_strategy(Strategy strategy, const VideoFrame& frame, const AuxMaps& aux,
                         const PipelineParams& params) {
  switch (strategy) {
    case Strategy::Saliency: return strategy_saliency(frame, aux);
    case Strategy::Depth: return strategy_depth(frame, aux, params.decay_rate);
    case Strategy::Segmentation: return strategy_segmentation(frame, aux);
    case Strategy::Combination: return strategy_combination(frame, aux, params.combination);
  }
  throw Error(ErrorCode::Internal, "unhandled strategy");
}

namespace {

// Overlap (in units of 1/cells of a pixel) between source pixels and output
// cells when n source pixels are split into `cells` equal bins. Integer
// valued, so uniform inputs average exactly.
Eigen::MatrixXd overlap_matrix(Eigen::Index n, Eigen::Index cells) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(cells, n);
  for (Eigen::Index c = 0; c < cells; ++c) {
    const Eigen::Index lo = c * n, hi = (c + 1) * n;  // cell span, scaled by cells
    for (Eigen::Index i = lo / cells; i < n && i * cells < hi; ++i) {
      const Eigen::Index a = std::max(lo, i * cells), b = std::min(hi, (i + 1) * cells);
      if (b > a) m(c, i) = static_cast<double>(b - a);
    }
  }
  return m;
}

}  // namespace

AmplitudeFrame encode_amplitudes(const ImageD& gray, const ElectrodeGrid& grid, int frame_index) {
  grid.validate();
  if (gray.size() == 0) throw Error(ErrorCode::InvalidArgument, "cannot encode an empty frame");
  const Eigen::MatrixXd my = overlap_matrix(gray.rows(), grid.rows);
  const Eigen::MatrixXd mx = overlap_matrix(gray.cols(), grid.cols);
  const Eigen::MatrixXd sums = my * gray.matrix() * mx.transpose();
  const double scale = static_cast<double>(gray.rows()) * static_cast<double>(gray.cols()) * 255.0;

  AmplitudeFrame out;
  out.frame_index = frame_index;
  out.values = (sums.array() / scale).max(0.0).min(1.0);
  return out;
}

namespace {

// Mean over the in-image part of a (2 half + 1)^2 window, via an integral image.
ImageD box_mean(const Eigen::ArrayXXd& integral, Eigen::Index rows, Eigen::Index cols, Eigen::Index half) {
  ImageD out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index r0 = std::max<Eigen::Index>(0, r - half), r1 = std::min(rows, r + half + 1);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index c0 = std::max<Eigen::Index>(0, c - half), c1 = std::min(cols, c + half + 1);
      const double sum = integral(r1, c1) - integral(r0, c1) - integral(r1, c0) + integral(r0, c0);
      out(r, c) = sum / static_cast<double>((r1 - r0) * (c1 - c0));
    }
  }
  return out;
}

}  // namespace

ImageD fallback_saliency(const ImageD& gray) {
  const Eigen::Index rows = gray.rows(), cols = gray.cols();
  Eigen::ArrayXXd integral = Eigen::ArrayXXd::Zero(rows + 1, cols + 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      integral(r + 1, c + 1) = gray(r, c) + integral(r, c + 1) + integral(r + 1, c) - integral(r, c);
    }
  }
  ImageD contrast = (box_mean(integral, rows, cols, 1) - box_mean(integral, rows, cols, 10)).abs();
  // integral-image round-off leaves ~1e-13 noise on flat regions
  const double tiny = 1e-9 * std::max(1.0, gray.abs().maxCoeff());
  contrast = (contrast > tiny).select(contrast, 0.0);
  const double peak = contrast.size() > 0 ? contrast.maxCoeff() : 0.0;
  if (peak > 0.0) contrast /= peak;
  return contrast;
}

ImageD fallback_saliency(const VideoFrame& frame) { return fallback_saliency(frame.gray()); }

}  // namespace phosphor
