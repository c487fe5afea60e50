// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phosphor/image.hpp"
#include "phosphor/renderer.hpp"

namespace phosphor {

/// 8-bit video frame, one plane (gray) or three (R, G, B).
struct VideoFrame {
  std::vector<ImageU8> planes;
  int frame_index = 0;

  Eigen::Index rows() const { return planes.empty() ? 0 : planes.front().rows(); }
  Eigen::Index cols() const { return planes.empty() ? 0 : planes.front().cols(); }
  /// Checks plane count, matching plane shapes and the 32-pixel minimum.
  void validate() const;
  /// Rec. 601 luma for RGB, identity for gray.
  ImageD gray() const;
};

/// Class ids used in label maps.
namespace label {
inline constexpr int background = 0;
inline constexpr int person = 1;
inline constexpr int bicycle = 2;
inline constexpr int car = 3;
inline constexpr int bus = 4;
inline constexpr int road = 10;
inline constexpr int sidewalk = 11;

inline bool is_object(int id) { return id >= person && id <= bus; }
inline bool is_known(int id) { return id == background || is_object(id) || id == road || id == sidewalk; }
}  // namespace label

/// Per-frame auxiliary maps. Depth grows with distance (arbitrary units).
struct AuxMaps {
  std::optional<ImageD> saliency;
  std::optional<ImageD> depth;
  std::optional<ImageI> labels;
};

enum class Strategy { Saliency, Depth, Segmentation, Combination };

inline constexpr Strategy kStrategies[] = {Strategy::Saliency, Strategy::Depth, Strategy::Segmentation,
                                           Strategy::Combination};

std::string_view strategy_name(Strategy strategy);
/// Accepts "saliency", "depth", "segmentation", "combination".
Strategy parse_strategy(std::string_view name);

/// Grayscale stimulus on the [0, 255] scale.
struct GrayFrame {
  ImageD pixels;
  Strategy provenance = Strategy::Saliency;
  int frame_index = 0;
  /// Set by the depth strategy when the cutoff equals the nearest depth.
  bool degenerate_depth = false;
};

/// Linear-interpolation percentile (q in [0, 100]) of all coefficients.
double percentile(const ImageD& values, double q);

GrayFrame strategy_saliency(const VideoFrame& frame, const AuxMaps& aux);

/// Depths beyond the 80th percentile go to 0; retained depths map through
///   g(d) = 180 * (exp(-k t) - exp(-k)) / (1 - exp(-k)),  t = (d - d_min) / (d_cut - d_min)
/// so the nearest pixel is 180 and the cutoff is 0. When d_cut == d_min every
/// retained pixel is 180 and degenerate_depth is set.
GrayFrame strategy_depth(const VideoFrame& frame, const AuxMaps& aux, double decay_rate = 2.0);

GrayFrame strategy_segmentation(const VideoFrame& frame, const AuxMaps& aux);

enum class CombinationMode {
  /// y = -45/16 * (8x/D - 16/D)^2 + 180 on raw depth x, D = d_max - d_min.
  Literal,
  /// y = 180 * (1 - t^2) on normalized depth t.
  Normalized,
};

/// Evaluates the combination depth curve before clipping.
double combination_curve(double depth, double d_min, double d_max, CombinationMode mode);

/// Mask of the top-10% salient pixels (ties at the threshold included).
Image<bool> salient_mask(const ImageD& saliency, double top_percent = 10.0);

GrayFrame strategy_combination(const VideoFrame& frame, const AuxMaps& aux,
                               CombinationMode mode = CombinationMode::Literal);

struct PipelineParams {
  double decay_rate = 2.0;
  CombinationMode combination = CombinationMode::Literal;

  bool operator==(const PipelineParams&) const = default;
};

GrayFrame apply_strategy(Strategy strategy, const VideoFrame& frame, const AuxMaps& aux,
                         const PipelineParams& params = {});

/// Area-weighted downscale to the electrode grid, divided by 255.
AmplitudeFrame encode_amplitudes(const ImageD& gray, const ElectrodeGrid& grid, int frame_index = 0);
inline AmplitudeFrame encode_amplitudes(const GrayFrame& gray, const ElectrodeGrid& grid) {
  return encode_amplitudes(gray.pixels, grid, gray.frame_index);
}

/// Local contrast |box3 - box21| normalized to [0, 1] per frame; a constant
/// frame gives all zeros.
ImageD fallback_saliency(const VideoFrame& frame);
ImageD fallback_saliency(const ImageD& gray);

}  // namespace phosphor
