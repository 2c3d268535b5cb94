// Copyright 2026 The PRISM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prism/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>

#include "prism/digest.hpp"
#include "prism/error.hpp"

namespace prism::image {
namespace {

bool is_png(std::string_view bytes) {
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

RgbImage decode_png(std::string_view bytes, const std::string& source) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    fail(Errc::UnsupportedImage, source + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage img;
  img.width = static_cast<int>(png.width);
  img.height = static_cast<int>(png.height);
  img.rgb.resize(PNG_IMAGE_SIZE(png));
  // Composite any alpha over white, which is how designs render on a canvas.
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&png, &white, img.rgb.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    fail(Errc::UnsupportedImage, source + ": " + message);
  }
  return img;
}

class PnmTokenizer {
 public:
  explicit PnmTokenizer(std::string_view bytes) : bytes_(bytes) {}

  int next_int(const std::string& source) {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) fail(Errc::UnsupportedImage, source + ": malformed PNM header");
    return std::stoi(std::string(bytes_.substr(start, pos_ - start)));
  }

  // A single whitespace byte separates the header from binary raster data.
  std::size_t raster_offset() const { return pos_ + 1; }

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

  std::string_view bytes_;
  std::size_t pos_ = 2;
};

RgbImage decode_pnm(std::string_view bytes, const std::string& source) {
  const char kind = bytes[1];
  PnmTokenizer tok(bytes);
  RgbImage img;
  img.width = tok.next_int(source);
  img.height = tok.next_int(source);
  const int maxval = tok.next_int(source);
  if (img.width <= 0 || img.height <= 0) fail(Errc::EmptyImage, source + ": zero-sized PNM");
  if (maxval <= 0 || maxval > 255) fail(Errc::UnsupportedImage, source + ": only 8-bit PNM supported");
  const bool color = kind == '3' || kind == '6';
  const bool binary = kind == '5' || kind == '6';
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  const std::size_t samples = n * (color ? 3 : 1);
  std::vector<int> values(samples);
  if (binary) {
    const std::size_t off = tok.raster_offset();
    if (bytes.size() < off + samples) fail(Errc::TruncatedFile, source + ": PNM raster truncated");
    for (std::size_t i = 0; i < samples; ++i) values[i] = static_cast<unsigned char>(bytes[off + i]);
  } else {
    for (auto& v : values) v = tok.next_int(source);
  }
  img.rgb.resize(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int v = color ? values[3 * i + c] : values[i];
      img.rgb[3 * i + c] = static_cast<std::uint8_t>(std::clamp(v * 255 / maxval, 0, 255));
    }
  }
  return img;
}

struct Tap {
  int index;
  double weight;
};

// For each output cell, the source cells it overlaps and their area fractions.
std::vector<std::vector<Tap>> area_taps(int in_size, int out_size) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    double total = 0.0;
    for (int i = static_cast<int>(std::floor(lo)); i < in_size && i < hi; ++i) {
      const double w = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
      if (w > 0) {
        taps[o].push_back({i, w});
        total += w;
      }
    }
    for (auto& t : taps[o]) t.weight /= total;
  }
  return taps;
}

constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigitFont = {{
    {0b111, 0b101, 0b101, 0b101, 0b111},
    {0b010, 0b110, 0b010, 0b010, 0b111},
    {0b111, 0b001, 0b111, 0b100, 0b111},
    {0b111, 0b001, 0b111, 0b001, 0b111},
    {0b101, 0b101, 0b111, 0b001, 0b001},
    {0b111, 0b100, 0b111, 0b001, 0b111},
    {0b111, 0b100, 0b111, 0b101, 0b111},
    {0b111, 0b001, 0b010, 0b010, 0b010},
    {0b111, 0b101, 0b111, 0b101, 0b111},
    {0b111, 0b101, 0b111, 0b001, 0b111},
}};

void fill_rect(RgbImage& img, int x0, int y0, int w, int h, Rgb c) {
  for (int y = std::max(0, y0); y < std::min(img.height, y0 + h); ++y) {
    for (int x = std::max(0, x0); x < std::min(img.width, x0 + w); ++x) {
      auto* p = &img.rgb[(static_cast<std::size_t>(y) * img.width + x) * 3];
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
    }
  }
}

}  // namespace

RgbImage decode(std::string_view bytes, const std::string& source) {
  if (bytes.empty()) fail(Errc::EmptyImage, source + ": empty file");
  if (is_png(bytes)) return decode_png(bytes, source);
  if (bytes.size() >= 2 && bytes[0] == 'P' && std::string_view("2356").find(bytes[1]) != std::string_view::npos) {
    return decode_pnm(bytes, source);
  }
  fail(Errc::UnsupportedImage, source + ": not a PNG or PNM image");
}

RgbImage load(const std::string& path) {
  std::string bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const Error&) {
    fail(Errc::MissingImage, "cannot read image " + path);
  }
  return decode(bytes, path);
}

std::string encode_png(const RgbImage& img) {
  if (img.empty()) fail(Errc::EmptyImage, "cannot encode an empty image");
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.rgb.data(), 0, nullptr)) {
    fail(Errc::UnsupportedImage, std::string("png encode: ") + png.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.rgb.data(), 0, nullptr)) {
    fail(Errc::UnsupportedImage, std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

RgbImage solid(int width, int height, Rgb color) {
  RgbImage img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  fill_rect(img, 0, 0, width, height, color);
  return img;
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage g;
  g.width = img.width;
  g.height = img.height;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  g.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.pixels[i] = 0.299 * img.rgb[3 * i] + 0.587 * img.rgb[3 * i + 1] + 0.114 * img.rgb[3 * i + 2];
  }
  return g;
}

GrayImage box_resample(const GrayImage& img, int out_width, int out_height) {
  if (img.empty()) fail(Errc::EmptyImage, "cannot resample an empty image");
  const auto xt = area_taps(img.width, out_width);
  const auto yt = area_taps(img.height, out_height);
  // horizontal pass, then vertical
  std::vector<double> tmp(static_cast<std::size_t>(img.height) * out_width, 0.0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      double acc = 0.0;
      for (const auto& t : xt[x]) acc += t.weight * img.at(t.index, y);
      tmp[static_cast<std::size_t>(y) * out_width + x] = acc;
    }
  }
  GrayImage out;
  out.width = out_width;
  out.height = out_height;
  out.pixels.assign(static_cast<std::size_t>(out_width) * out_height, 0.0);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      double acc = 0.0;
      for (const auto& t : yt[y]) acc += t.weight * tmp[static_cast<std::size_t>(t.index) * out_width + x];
      out.pixels[static_cast<std::size_t>(y) * out_width + x] = acc;
    }
  }
  return out;
}

RgbImage fit(const RgbImage& img, int width, int height, Rgb background) {
  RgbImage canvas = solid(width, height, background);
  if (img.empty()) return canvas;
  const double s = std::min(static_cast<double>(width) / img.width, static_cast<double>(height) / img.height);
  const int w = std::max(1, static_cast<int>(std::lround(img.width * s)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height * s)));
  RgbImage scaled;
  scaled.width = w;
  scaled.height = h;
  scaled.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  for (int c = 0; c < 3; ++c) {
    GrayImage plane;
    plane.width = img.width;
    plane.height = img.height;
    plane.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < plane.pixels.size(); ++i) plane.pixels[i] = img.rgb[3 * i + c];
    const GrayImage r = box_resample(plane, w, h);
    for (std::size_t i = 0; i < r.pixels.size(); ++i) {
      scaled.rgb[3 * i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(r.pixels[i]), 0L, 255L));
    }
  }
  blit(canvas, scaled, (width - w) / 2, (height - h) / 2);
  return canvas;
}

void blit(RgbImage& dst, const RgbImage& src, int x, int y) {
  for (int sy = 0; sy < src.height; ++sy) {
    const int dy = y + sy;
    if (dy < 0 || dy >= dst.height) continue;
    for (int sx = 0; sx < src.width; ++sx) {
      const int dx = x + sx;
      if (dx < 0 || dx >= dst.width) continue;
      std::memcpy(&dst.rgb[(static_cast<std::size_t>(dy) * dst.width + dx) * 3],
                  &src.rgb[(static_cast<std::size_t>(sy) * src.width + sx) * 3], 3);
    }
  }
}

void draw_number(RgbImage& img, int x, int y, int value, int scale) {
  const std::string digits = std::to_string(value);
  const int glyph_w = 3 * scale;
  const int gap = scale;
  const int pad = scale;
  const int plate_w = static_cast<int>(digits.size()) * (glyph_w + gap) - gap + 2 * pad;
  const int plate_h = 5 * scale + 2 * pad;
  fill_rect(img, x, y, plate_w, plate_h, Rgb{0, 0, 0});
  int cx = x + pad;
  for (char ch : digits) {
    const auto& glyph = kDigitFont[ch - '0'];
    for (int row = 0; row < 5; ++row) {
      for (int col = 0; col < 3; ++col) {
        if (glyph[row] & (0b100 >> col)) {
          fill_rect(img, cx + col * scale, y + pad + row * scale, scale, scale, Rgb{255, 255, 255});
        }
      }
    }
    cx += glyph_w + gap;
  }
}

}  // namespace prism::image
