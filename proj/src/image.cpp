// SPDX-License-Identifier: Apache-2.0
#include "phosphor/image.hpp"

#include <array>
#include <cctype>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>
#include <png.h>

#include "phosphor/error.hpp"

namespace phosphor {
namespace {

// Reads the whitespace/comment separated header tokens of a Netpbm or PFM
// file, leaving the stream positioned at the first payload byte.
std::string next_token(std::istream& in) {
  std::string token;
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      if (!token.empty()) break;
    } else {
      token.push_back(static_cast<char>(ch));
    }
    ch = in.get();
  }
  return token;
}

int parse_int(const std::string& token, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    int value = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Io, "malformed header in " + path.string());
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<ImageU8> read_pnm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = next_token(in);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw Error(ErrorCode::Io, "not a binary PGM/PPM: " + path.string());
  }
  const int width = parse_int(next_token(in), path);
  const int height = parse_int(next_token(in), path);
  const int maxval = parse_int(next_token(in), path);
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw Error(ErrorCode::Io, "unsupported PNM geometry in " + path.string());
  }
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
  if (in.gcount() != static_cast<std::streamsize>(buffer.size())) {
    throw Error(ErrorCode::Io, "truncated image " + path.string());
  }
  std::vector<ImageU8> planes(channels, ImageU8(height, width));
  std::size_t k = 0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      for (int ch = 0; ch < channels; ++ch) planes[ch](r, c) = buffer[k++];
    }
  }
  return planes;
}

ImageU8 read_pgm(const std::filesystem::path& path) {
  auto planes = read_pnm(path);
  if (planes.size() != 1) throw Error(ErrorCode::Io, "expected grayscale PGM: " + path.string());
  return std::move(planes.front());
}

void write_pgm(const std::filesystem::path& path, const ImageU8& image) {
  auto out = open_out(path);
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

void write_ppm(const std::filesystem::path& path, const ImageU8& red, const ImageU8& green,
               const ImageU8& blue) {
  if (red.rows() != green.rows() || red.rows() != blue.rows() || red.cols() != green.cols() ||
      red.cols() != blue.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "PPM planes differ in shape");
  }
  std::string buffer;
  buffer.reserve(static_cast<std::size_t>(red.size()) * 3);
  for (Eigen::Index r = 0; r < red.rows(); ++r) {
    for (Eigen::Index c = 0; c < red.cols(); ++c) {
      buffer.push_back(static_cast<char>(red(r, c)));
      buffer.push_back(static_cast<char>(green(r, c)));
      buffer.push_back(static_cast<char>(blue(r, c)));
    }
  }
  auto out = open_out(path);
  out << "P6\n" << red.cols() << ' ' << red.rows() << "\n255\n";
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

ImageF read_pfm(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (next_token(in) != "Pf") throw Error(ErrorCode::Io, "not a grayscale PFM: " + path.string());
  const int width = parse_int(next_token(in), path);
  const int height = parse_int(next_token(in), path);
  const std::string scale_token = next_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_token);
  } catch (const std::exception&) {
    throw Error(ErrorCode::Io, "malformed PFM scale in " + path.string());
  }
  if (width <= 0 || height <= 0 || scale == 0.0) {
    throw Error(ErrorCode::Io, "unsupported PFM geometry in " + path.string());
  }
  const bool little = scale < 0.0;
  ImageF image(height, width);
  std::vector<std::uint32_t> row(width);
  for (int r = height - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(width * 4));
    if (in.gcount() != width * 4) throw Error(ErrorCode::Io, "truncated PFM " + path.string());
    for (int c = 0; c < width; ++c) {
      std::uint32_t bits = row[c];
      if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
      image(r, c) = std::bit_cast<float>(bits);
    }
  }
  return image;
}

void write_pfm(const std::filesystem::path& path, const ImageF& image) {
  auto out = open_out(path);
  out << "Pf\n" << image.cols() << ' ' << image.rows() << "\n-1.0\n";
  std::vector<std::uint32_t> row(image.cols());
  for (Eigen::Index r = image.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(image(r, c));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      row[c] = bits;
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::string encode_png(const ImageU8& image) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::Internal, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::Internal, "png_create_info_struct failed");
  }
  std::string bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Internal, "PNG encoding failed");
  }
  png_set_write_fn(
      png, &bytes,
      [](png_structp p, png_bytep data, png_size_t length) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), length);
      },
      [](png_structp) {});
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols()), static_cast<png_uint_32>(image.rows()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    png_write_row(png, const_cast<png_bytep>(image.data() + r * image.cols()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return bytes;
}

std::string numbered_name(std::string_view stem, int index, std::string_view extension) {
  std::ostringstream name;
  name << stem << '_' << std::setw(5) << std::setfill('0') << index << '.' << extension;
  return name.str();
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  auto out = open_out(path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Internal, "SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace phosphor
