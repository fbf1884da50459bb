#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alien/error.hpp"
#include "alien/io.hpp"

namespace alien {

// 8-bit interleaved RGB raster, row-major. Pixel (row i, col j) samples the
// scene at continuous coordinates (x = j, y = i).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // height * width * 3

  static Image filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Image img;
    img.width = w;
    img.height = h;
    img.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t p = 0; p < img.data.size(); p += 3) {
      img.data[p] = r;
      img.data[p + 1] = g;
      img.data[p + 2] = b;
    }
    return img;
  }

  std::uint8_t* pixel(int i, int j) {
    return data.data() + (static_cast<std::size_t>(i) * width + j) * 3;
  }
  const std::uint8_t* pixel(int i, int j) const {
    return data.data() + (static_cast<std::size_t>(i) * width + j) * 3;
  }
  bool empty() const { return width <= 0 || height <= 0; }
};

// Single-channel 8-bit raster (hot-pixel annotation masks).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // height * width

  std::uint8_t at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * width + j];
  }
};

namespace detail {

// Skips whitespace and '#' comments between netpbm header tokens.
inline std::size_t next_token(const std::string& s, std::size_t pos, std::string& tok) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  tok = s.substr(start, pos - start);
  return pos;
}

inline std::size_t parse_pnm_header(const std::string& raw, const char* magic,
                                    const std::string& name, int& w, int& h) {
  std::string tok;
  std::size_t pos = next_token(raw, 0, tok);
  if (tok != magic) fail(Errc::bad_magic, name + ": expected " + magic + " header");
  std::string ws, hs, maxs;
  pos = next_token(raw, pos, ws);
  pos = next_token(raw, pos, hs);
  pos = next_token(raw, pos, maxs);
  try {
    w = std::stoi(ws);
    h = std::stoi(hs);
  } catch (...) {
    fail(Errc::io_failure, name + ": malformed dimensions");
  }
  if (w <= 0 || h <= 0) fail(Errc::io_failure, name + ": non-positive dimensions");
  if (maxs != "255") fail(Errc::io_failure, name + ": only maxval 255 is supported");
  return pos + 1;  // single whitespace byte separates header from pixel data
}

}  // namespace detail

inline Image read_ppm(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  Image img;
  const std::size_t off =
      detail::parse_pnm_header(raw, "P6", path.string(), img.width, img.height);
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * 3;
  if (raw.size() < off + need)
    fail(Errc::truncated_file, path.string() + ": pixel data truncated");
  img.data.assign(raw.begin() + off, raw.begin() + off + need);
  return img;
}

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::string payload = "P6\n" + std::to_string(img.width) + " " +
                        std::to_string(img.height) + "\n255\n";
  payload.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  atomic_write(path, payload);
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  GrayImage img;
  const std::size_t off =
      detail::parse_pnm_header(raw, "P5", path.string(), img.width, img.height);
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height;
  if (raw.size() < off + need)
    fail(Errc::truncated_file, path.string() + ": pixel data truncated");
  img.data.assign(raw.begin() + off, raw.begin() + off + need);
  return img;
}

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::string payload = "P5\n" + std::to_string(img.width) + " " +
                        std::to_string(img.height) + "\n255\n";
  payload.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  atomic_write(path, payload);
}

struct Rgb {
  double r = 0, g = 0, b = 0;  // each in [0, 1]
};

// h in degrees (any value, wrapped mod 360), s and v in [0, 1].
inline Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)      { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

// Inverse of hsv_to_rgb. Gray pixels (chroma 0) report hue 0.
inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double c = mx - mn;
  v = mx;
  s = mx > 0 ? c / mx : 0.0;
  if (c <= 0) {
    h = 0.0;
    return;
  }
  if (mx == r)      h = 60.0 * std::fmod((g - b) / c, 6.0);
  else if (mx == g) h = 60.0 * ((b - r) / c + 2.0);
  else              h = 60.0 * ((r - g) / c + 4.0);
  if (h < 0) h += 360.0;
}

inline std::uint8_t quantize8(double unit) {
  const double q = std::lround(std::clamp(unit, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(q);
}

// Bilinear resampling by a uniform scale factor (output dims rounded).
inline Image resample_bilinear(const Image& src, double scale) {
  if (scale <= 0) fail(Errc::bad_config, "resample scale must be positive");
  Image dst;
  dst.width = std::max(1, static_cast<int>(std::lround(src.width * scale)));
  dst.height = std::max(1, static_cast<int>(std::lround(src.height * scale)));
  dst.data.resize(static_cast<std::size_t>(dst.width) * dst.height * 3);
  const double sx = static_cast<double>(src.width) / dst.width;
  const double sy = static_cast<double>(src.height) / dst.height;
  for (int i = 0; i < dst.height; ++i) {
    const double fy = std::clamp((i + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int j = 0; j < dst.width; ++j) {
      const double fx = std::clamp((j + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      std::uint8_t* out = dst.pixel(i, j);
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1 - wx) * src.pixel(y0, x0)[ch] + wx * src.pixel(y0, x1)[ch];
        const double bot = (1 - wx) * src.pixel(y1, x0)[ch] + wx * src.pixel(y1, x1)[ch];
        out[ch] = static_cast<std::uint8_t>(std::lround((1 - wy) * top + wy * bot));
      }
    }
  }
  return dst;
}

}  // namespace alien
