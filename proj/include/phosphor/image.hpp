// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace phosphor {

/// Row-major 2D raster; row 0 is the top of the image.
template <typename Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ImageD = Image<double>;
using ImageF = Image<float>;
using ImageU8 = Image<std::uint8_t>;
using ImageI = Image<int>;

/// Round to nearest 8-bit level after scaling; halves go to even and values
/// are clamped to [0, 255].
template <typename Derived>
ImageU8 quantize_u8(const Eigen::ArrayBase<Derived>& values, double scale = 1.0) {
  ImageU8 out(values.rows(), values.cols());
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      double v = std::nearbyint(static_cast<double>(values(r, c)) * scale);
      v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
      out(r, c) = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

// Netpbm (binary P5/P6, maxval 255). A PGM reads as one plane, a PPM as
// three planes (R, G, B).
std::vector<ImageU8> read_pnm(const std::filesystem::path& path);
ImageU8 read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const ImageU8& image);
void write_ppm(const std::filesystem::path& path, const ImageU8& red, const ImageU8& green,
               const ImageU8& blue);

// Portable float map, grayscale ("Pf"), little-endian. Rows are stored
// bottom-to-top on disk as the format requires; in memory row 0 is the top.
ImageF read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const ImageF& image);

/// 8-bit grayscale PNG, returned as the encoded byte stream.
std::string encode_png(const ImageU8& image);

/// frame_00012.pgm style names.
std::string numbered_name(std::string_view stem, int index, std::string_view extension);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace phosphor
