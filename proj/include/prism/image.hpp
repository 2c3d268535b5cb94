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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace prism::image {

/// Single-channel image with real-valued pixels, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  bool empty() const { return width <= 0 || height <= 0 || pixels.empty(); }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// 8-bit interleaved RGB image, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  bool empty() const { return width <= 0 || height <= 0; }
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Decodes PNG or binary/ASCII PNM (P2, P3, P5, P6), sniffed from the header.
RgbImage decode(std::string_view bytes, const std::string& source);
RgbImage load(const std::string& path);

std::string encode_png(const RgbImage& img);

RgbImage solid(int width, int height, Rgb color);

/// ITU-R BT.601 luma.
GrayImage to_gray(const RgbImage& img);

/// Exact area-weighted box resampling of a gray image.
GrayImage box_resample(const GrayImage& img, int out_width, int out_height);

/// Aspect-preserving fit into a width x height canvas, centered on `background`.
RgbImage fit(const RgbImage& img, int width, int height, Rgb background);

/// Copies `src` into `dst` with its top-left corner at (x, y), clipped.
void blit(RgbImage& dst, const RgbImage& src, int x, int y);

/// Stamps decimal digits with a 3x5 bitmap font on a contrasting plate.
void draw_number(RgbImage& img, int x, int y, int value, int scale);

}  // namespace prism::image
