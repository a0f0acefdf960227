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

#include "freqdp/image.h"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "Eigen/Dense"
#include "absl/strings/str_cat.h"

namespace freqdp {
namespace {

constexpr uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

absl::StatusOr<std::vector<uint8_t>> ReadFileBytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  }
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) {
    return absl::NotFoundError(absl::StrCat("cannot read ", path.string()));
  }
  return bytes;
}

absl::StatusOr<RgbImage> DecodePng(const std::vector<uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    return absl::DataLossError(absl::StrCat("corrupt PNG: ", image.message));
  }
  // Read with alpha so libpng does not composite it onto a background.
  image.format = PNG_FORMAT_RGBA;
  if (image.width == 0 || image.height == 0 || image.width > (1u << 16) ||
      image.height > (1u << 16)) {
    png_image_free(&image);
    return absl::DataLossError("PNG has invalid dimensions");
  }
  RgbImage out(static_cast<int>(image.width), static_cast<int>(image.height));
  std::vector<uint8_t> rgba(size_t(image.width) * image.height * 4);
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    return absl::DataLossError(absl::StrCat("corrupt PNG: ", msg));
  }
  for (size_t i = 0; i < rgba.size() / 4; ++i) {
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = rgba[i * 4 + c];
  }
  return out;
}

// Skips whitespace and '#' comments between PNM header tokens.
bool ReadPnmToken(const std::vector<uint8_t>& b, size_t& pos, long& value) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) return false;
  value = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    value = value * 10 + (b[pos] - '0');
    if (value > (1L << 20)) return false;
    ++pos;
  }
  return true;
}

absl::StatusOr<RgbImage> DecodePpm(const std::vector<uint8_t>& b) {
  size_t pos = 2;
  long w = 0, h = 0, maxval = 0;
  if (!ReadPnmToken(b, pos, w) || !ReadPnmToken(b, pos, h) ||
      !ReadPnmToken(b, pos, maxval)) {
    return absl::DataLossError("corrupt PPM header");
  }
  if (maxval != 255) {
    return absl::UnimplementedError("only 8-bit PPM (maxval 255) is supported");
  }
  if (w <= 0 || h <= 0) return absl::DataLossError("PPM has invalid dimensions");
  if (pos >= b.size() || !std::isspace(b[pos])) {
    return absl::DataLossError("corrupt PPM header");
  }
  ++pos;
  const size_t need = size_t(w) * size_t(h) * 3;
  if (b.size() - pos < need) return absl::DataLossError("truncated PPM payload");
  RgbImage out(static_cast<int>(w), static_cast<int>(h));
  std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(pos), need,
              out.data.begin());
  return out;
}

float Clamp255(float v) { return std::clamp(v, 0.f, 255.f); }

struct Tap {
  int i0, i1;
  float t;  // weight of i1
};

// Source taps for each output coordinate along one axis.
std::vector<Tap> AxisTaps(int n, int factor, UpsampleKernel kernel) {
  std::vector<Tap> taps(size_t(n) * factor);
  for (int x = 0; x < n * factor; ++x) {
    if (kernel == UpsampleKernel::kNearest) {
      taps[x] = {x / factor, x / factor, 0.f};
      continue;
    }
    double src = (x + 0.5) / factor - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > n - 1) i0 = n - 1;
    const int i1 = std::min(i0 + 1, n - 1);
    taps[x] = {i0, i1, static_cast<float>(src - i0)};
  }
  return taps;
}

// (U^T U)^-1 U^T for the per-axis upsampling operator U, row-major n x (n*f).
Eigen::MatrixXd AxisLeftInverse(int n, int factor, UpsampleKernel kernel) {
  const auto taps = AxisTaps(n, factor, kernel);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n * factor, n);
  for (int x = 0; x < n * factor; ++x) {
    u(x, taps[x].i0) += 1.0 - taps[x].t;
    u(x, taps[x].i1) += taps[x].t;
  }
  const Eigen::MatrixXd gram = u.transpose() * u;
  return gram.ldlt().solve(u.transpose());
}

}  // namespace

absl::Status ValidateImage(const RgbImage& img) {
  if (img.width <= 0 || img.height <= 0) {
    return absl::InvalidArgumentError("image dimensions must be positive");
  }
  if (img.data.size() != size_t(img.width) * img.height * 3) {
    return absl::InvalidArgumentError("image buffer size does not match dimensions");
  }
  return absl::OkStatus();
}

absl::StatusOr<RgbImage> LoadImage(const std::filesystem::path& path) {
  auto bytes = ReadFileBytes(path);
  if (!bytes.ok()) return bytes.status();
  const auto& b = *bytes;
  if (b.size() >= 8 && std::equal(std::begin(kPngSignature),
                                  std::end(kPngSignature), b.begin())) {
    return DecodePng(b);
  }
  if (b.size() >= 2 && b[0] == 'P' && b[1] == '6') return DecodePpm(b);
  if (b.size() >= 2 && b[0] == 'P' && b[1] >= '1' && b[1] <= '7') {
    return absl::UnimplementedError("only binary P6 PPM is supported");
  }
  return absl::UnimplementedError(
      absl::StrCat("unsupported image format: ", path.string()));
}

absl::Status SaveImage(const RgbImage& img, const std::filesystem::path& path) {
  if (auto s = ValidateImage(img); !s.ok()) return s;
  const std::string ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.data.data(), 0,
                                 nullptr)) {
      return absl::InternalError(
          absl::StrCat("PNG write failed: ", image.message));
    }
    return absl::OkStatus();
  }
  if (ext == ".ppm" || ext == ".PPM") {
    std::ofstream out(path, std::ios::binary);
    if (!out) return absl::NotFoundError(absl::StrCat("cannot write ", path.string()));
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) return absl::InternalError("PPM write failed");
    return absl::OkStatus();
  }
  return absl::UnimplementedError(absl::StrCat("unsupported extension: ", ext));
}

YcbcrImage RgbToYcbcr(const RgbImage& img) {
  YcbcrImage out(img.width, img.height);
  const size_t n = size_t(img.width) * img.height;
  for (size_t p = 0; p < n; ++p) {
    const float r = img.data[3 * p], g = img.data[3 * p + 1],
                b = img.data[3 * p + 2];
    out.data[3 * p] = Clamp255(0.299f * r + 0.587f * g + 0.114f * b);
    out.data[3 * p + 1] =
        Clamp255(-0.168736f * r - 0.331264f * g + 0.5f * b + 128.f);
    out.data[3 * p + 2] =
        Clamp255(0.5f * r - 0.418688f * g - 0.081312f * b + 128.f);
  }
  return out;
}

RgbImage YcbcrToRgb(const YcbcrImage& img) {
  RgbImage out(img.width, img.height);
  const size_t n = size_t(img.width) * img.height;
  auto to_u8 = [](float v) {
    return static_cast<uint8_t>(std::lround(Clamp255(v)));
  };
  for (size_t p = 0; p < n; ++p) {
    const float y = img.data[3 * p], cb = img.data[3 * p + 1] - 128.f,
                cr = img.data[3 * p + 2] - 128.f;
    out.data[3 * p] = to_u8(y + 1.402f * cr);
    out.data[3 * p + 1] = to_u8(y - 0.344136f * cb - 0.714136f * cr);
    out.data[3 * p + 2] = to_u8(y + 1.772f * cb);
  }
  return out;
}

YcbcrImage ShiftRange(YcbcrImage img, float offset) {
  for (float& v : img.data) v += offset;
  return img;
}

absl::StatusOr<YcbcrImage> Upsample(const YcbcrImage& img, int factor,
                                    UpsampleKernel kernel, size_t max_pixels) {
  if (factor < 1) return absl::InvalidArgumentError("upsample factor must be >= 1");
  const size_t out_pixels =
      size_t(img.width) * factor * size_t(img.height) * factor;
  if (out_pixels > max_pixels) {
    return absl::ResourceExhaustedError(absl::StrCat(
        "upsampled image would have ", out_pixels, " pixels (cap ", max_pixels, ")"));
  }
  if (factor == 1) return img;
  const int ow = img.width * factor, oh = img.height * factor;
  const auto tx = AxisTaps(img.width, factor, kernel);
  const auto ty = AxisTaps(img.height, factor, kernel);

  YcbcrImage rows(ow, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < ow; ++x) {
      const Tap& t = tx[x];
      for (int c = 0; c < 3; ++c) {
        const float a = img.at(t.i0, y, c), b = img.at(t.i1, y, c);
        rows.at(x, y, c) = t.t == 0.f ? a : a + t.t * (b - a);
      }
    }
  }
  YcbcrImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    const Tap& t = ty[y];
    for (int x = 0; x < ow; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float a = rows.at(x, t.i0, c), b = rows.at(x, t.i1, c);
        out.at(x, y, c) = t.t == 0.f ? a : a + t.t * (b - a);
      }
    }
  }
  return out;
}

absl::StatusOr<YcbcrImage> Downsample(const YcbcrImage& img, int factor,
                                      UpsampleKernel kernel) {
  if (factor < 1) return absl::InvalidArgumentError("factor must be >= 1");
  if (img.width % factor != 0 || img.height % factor != 0) {
    return absl::InvalidArgumentError("image dimensions not divisible by factor");
  }
  if (factor == 1) return img;
  const int w = img.width / factor, h = img.height / factor;
  YcbcrImage out(w, h);
  if (kernel == UpsampleKernel::kNearest) {
    const float inv = 1.f / float(factor * factor);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          float sum = 0.f;
          for (int dy = 0; dy < factor; ++dy) {
            for (int dx = 0; dx < factor; ++dx) {
              sum += img.at(x * factor + dx, y * factor + dy, c);
            }
          }
          out.at(x, y, c) = sum * inv;
        }
      }
    }
    return out;
  }
  const Eigen::MatrixXd px = AxisLeftInverse(w, factor, kernel);
  const Eigen::MatrixXd py = AxisLeftInverse(h, factor, kernel);
  // Columns first: tmp(x_out, Y) = sum_X px(x_out, X) img(X, Y).
  std::vector<double> tmp(size_t(w) * img.height * 3, 0.0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int sx = 0; sx < img.width; ++sx) {
        const double wgt = px(x, sx);
        if (wgt == 0.0) continue;
        for (int c = 0; c < 3; ++c) acc[c] += wgt * img.at(sx, y, c);
      }
      for (int c = 0; c < 3; ++c) tmp[(size_t(y) * w + x) * 3 + c] = acc[c];
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int sy = 0; sy < img.height; ++sy) {
        const double wgt = py(y, sy);
        if (wgt == 0.0) continue;
        for (int c = 0; c < 3; ++c) acc[c] += wgt * tmp[(size_t(sy) * w + x) * 3 + c];
      }
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(acc[c]);
    }
  }
  return out;
}

absl::StatusOr<UpsampleKernel> ParseUpsampleKernel(std::string_view name) {
  if (name == "nearest") return UpsampleKernel::kNearest;
  if (name == "bilinear") return UpsampleKernel::kBilinear;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown upsample kernel '", std::string(name), "' (expected nearest|bilinear)"));
}

const char* UpsampleKernelName(UpsampleKernel kernel) {
  return kernel == UpsampleKernel::kNearest ? "nearest" : "bilinear";
}

}  // namespace freqdp
