// Copyright 2026 The FreqDP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FREQDP_IMAGE_H_
#define FREQDP_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace freqdp {

// 8-bit RGB, row-major, interleaved (r, g, b).
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(size_t(w) * h * 3, 0) {}

  uint8_t& at(int x, int y, int c) { return data[(size_t(y) * width + x) * 3 + c]; }
  uint8_t at(int x, int y, int c) const {
    return data[(size_t(y) * width + x) * 3 + c];
  }
  bool operator==(const RgbImage&) const = default;
};

// Real-valued 3-channel image in (Y, Cb, Cr) order, same layout as RgbImage.
struct YcbcrImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  YcbcrImage() = default;
  YcbcrImage(int w, int h) : width(w), height(h), data(size_t(w) * h * 3, 0.f) {}

  float& at(int x, int y, int c) { return data[(size_t(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const {
    return data[(size_t(y) * width + x) * 3 + c];
  }
};

absl::Status ValidateImage(const RgbImage& img);

// PNG (8-bit gray/RGB/RGBA, alpha dropped) and binary PPM (P6, maxval 255).
// Status codes: kNotFound for unreadable paths, kUnimplemented for
// unsupported formats, kDataLoss for corrupt data.
absl::StatusOr<RgbImage> LoadImage(const std::filesystem::path& path);

// Format chosen by extension: .png or .ppm.
absl::Status SaveImage(const RgbImage& img, const std::filesystem::path& path);

// Full-range BT.601 (JFIF). Outputs are clamped to [0, 255] and not rounded.
YcbcrImage RgbToYcbcr(const RgbImage& img);

// Inverse of RgbToYcbcr, rounded to nearest and clamped to [0, 255].
RgbImage YcbcrToRgb(const YcbcrImage& img);

// Adds `offset` to every sample. ShiftRange(img) maps [0, 255] to [-128, 127].
YcbcrImage ShiftRange(YcbcrImage img, float offset = -128.f);

enum class UpsampleKernel {
  kNearest,   // pixel replication
  kBilinear,  // half-pixel centres, clamped edges
};

// "nearest" or "bilinear".
absl::StatusOr<UpsampleKernel> ParseUpsampleKernel(std::string_view name);
const char* UpsampleKernelName(UpsampleKernel kernel);

inline constexpr size_t kDefaultMaxUpsampledPixels = size_t{1} << 26;

// Output is (width * factor) x (height * factor). Fails with
// kResourceExhausted when the output would exceed `max_pixels`.
absl::StatusOr<YcbcrImage> Upsample(
    const YcbcrImage& img, int factor, UpsampleKernel kernel,
    size_t max_pixels = kDefaultMaxUpsampledPixels);

// Least-squares left inverse of Upsample with the same kernel. For kNearest
// this is block averaging. Dimensions must be divisible by `factor`.
absl::StatusOr<YcbcrImage> Downsample(const YcbcrImage& img, int factor,
                                      UpsampleKernel kernel);

}  // namespace freqdp

#endif  // FREQDP_IMAGE_H_
