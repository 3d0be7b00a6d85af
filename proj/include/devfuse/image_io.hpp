#pragma once

// 8-bit PNG (via libpng) and binary PNM (P5/P6) reading and writing.
// Samples map to [0, 1] as v / 255; writing rounds v * 255 and clamps.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "devfuse/atomic_file.hpp"
#include "devfuse/error.hpp"
#include "devfuse/multi_matrix.hpp"

namespace devfuse {

struct ImageFile {
  std::filesystem::path path;
  MultiMatrix image;
};

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

inline std::uint8_t quantize(double v) {
  const double s = std::round(v * 255.0);
  return static_cast<std::uint8_t>(std::clamp(s, 0.0, 255.0));
}

// Interleaved 8-bit samples -> planar [0, 1] matrix.
inline MultiMatrix from_interleaved(const std::uint8_t* px, std::size_t rows, std::size_t cols,
                                    std::size_t channels, double maxval = 255.0) {
  MultiMatrix m(rows, cols, channels);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      for (std::size_t k = 0; k < channels; ++k)
        m(i, j, k) = px[(i * cols + j) * channels + k] / maxval;
  return m;
}

inline std::vector<std::uint8_t> to_interleaved(const MultiMatrix& m) {
  std::vector<std::uint8_t> px(m.size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      for (std::size_t k = 0; k < m.channels(); ++k)
        px[(i * m.cols() + j) * m.channels() + k] = quantize(m(i, j, k));
  return px;
}

inline MultiMatrix decode_png(const std::string& bytes, const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw error(errc::io, path.string() + ": " + img.message);
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw error(errc::io, path.string() + ": " + msg);
  }
  return from_interleaved(px.data(), img.height, img.width, color ? 3 : 1);
}

inline std::string encode_png(const MultiMatrix& m) {
  const auto px = to_interleaved(m);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(m.cols());
  img.height = static_cast<png_uint_32>(m.rows());
  img.format = m.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, px.data(), 0, nullptr))
    throw error(errc::io, std::string("png encode: ") + img.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, px.data(), 0, nullptr))
    throw error(errc::io, std::string("png encode: ") + img.message);
  out.resize(size);
  return out;
}

class PnmHeaderReader {
 public:
  PnmHeaderReader(const std::string& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  long next_int() {
    skip_space_and_comments();
    long v = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_++] - '0');
      any = true;
      if (v > 1'000'000) fail("header value too large");
    }
    if (!any) fail("malformed header");
    return v;
  }

  std::size_t data_offset() {
    // Exactly one whitespace byte separates maxval from the raster.
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      fail("malformed header");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw error(errc::io, path_.string() + ": " + what);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 2;
};

inline MultiMatrix decode_pnm(const std::string& bytes, const std::filesystem::path& path) {
  PnmHeaderReader hdr(bytes, path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5'))
    hdr.fail("not a binary PPM/PGM file");
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  const long width = hdr.next_int();
  const long height = hdr.next_int();
  const long maxval = hdr.next_int();
  if (width < 1 || height < 1) hdr.fail("empty image");
  if (maxval < 1 || maxval > 255) hdr.fail("only 8-bit PNM is supported");
  const std::size_t offset = hdr.data_offset();
  const std::size_t need = static_cast<std::size_t>(width * height) * channels;
  if (bytes.size() - offset < need) hdr.fail("truncated raster");
  return from_interleaved(reinterpret_cast<const std::uint8_t*>(bytes.data() + offset),
                          static_cast<std::size_t>(height), static_cast<std::size_t>(width),
                          channels, static_cast<double>(maxval));
}

inline std::string encode_pnm(const MultiMatrix& m) {
  const auto px = to_interleaved(m);
  std::string out = std::string(m.channels() == 3 ? "P6" : "P5") + "\n" +
                    std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

}  // namespace detail

inline bool is_supported_image(const std::filesystem::path& p) {
  const auto ext = detail::lower_extension(p);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

/// Decodes a PNG or binary PNM file into a 1- or 3-channel matrix in [0, 1].
inline ImageFile load_image(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) == 0)
    return {path, detail::decode_png(bytes, path)};
  if (bytes.size() >= 2 && bytes[0] == 'P') return {path, detail::decode_pnm(bytes, path)};
  throw error(errc::io, path.string() + ": unsupported image container");
}

/// Writes m as PNG (.png) or binary PNM (anything else), atomically.
inline void save_image(const MultiMatrix& m, const std::filesystem::path& path) {
  if (m.channels() != 1 && m.channels() != 3)
    throw error(errc::invalid_argument, "only 1- or 3-channel images can be saved");
  const auto ext = detail::lower_extension(path);
  write_file_atomic(path, ext == ".png" ? detail::encode_png(m) : detail::encode_pnm(m));
}

}  // namespace devfuse
