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

#ifndef FREQDP_BDCT_H_
#define FREQDP_BDCT_H_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "freqdp/image.h"

namespace freqdp {

// Row-major 8x8 block: element (x, y) at index x * 8 + y, where x is the row.
using Block8 = std::array<float, 64>;

// Orthonormal type-II DCT, F = D B D^T.
Block8 Dct8Forward(const Block8& block);
Block8 Dct8Inverse(const Block8& coeffs);

// D(u, x) = alpha(u) cos((2x + 1) u pi / 16), row-major.
const std::array<double, 64>& Dct8Basis();

inline constexpr int kChannelsWithDc = 192;
inline constexpr int kChannelsWithoutDc = 189;
inline constexpr int kDcChannels[3] = {0, 64, 128};

// Channel k (with DC) = color * 64 + u * 8 + v, colors ordered Y, Cb, Cr.
// After RemoveDc the remaining channels keep their relative order.
int StrippedToFullChannel(int stripped);
std::optional<int> FullToStrippedChannel(int full);

enum class ColorSpace { kYcbcr };

// Blockwise DCT coefficients laid out [hb, wb, channels], channel fastest.
struct FrequencyTensor {
  int hb = 0;
  int wb = 0;
  int channels = kChannelsWithDc;
  bool dc_present = true;
  ColorSpace colorspace = ColorSpace::kYcbcr;
  std::vector<float> values;

  FrequencyTensor() = default;
  FrequencyTensor(int hb_, int wb_, int channels_)
      : hb(hb_),
        wb(wb_),
        channels(channels_),
        dc_present(channels_ == kChannelsWithDc),
        values(size_t(hb_) * wb_ * channels_, 0.f) {}

  size_t size() const { return values.size(); }
  size_t index(int i, int j, int k) const {
    return (size_t(i) * wb + j) * channels + k;
  }
  float& at(int i, int j, int k) { return values[index(i, j, k)]; }
  float at(int i, int j, int k) const { return values[index(i, j, k)]; }
  bool SameShape(const FrequencyTensor& o) const {
    return hb == o.hb && wb == o.wb && channels == o.channels;
  }
  bool operator==(const FrequencyTensor&) const = default;
};

// Per-color DC coefficient planes, [hb, wb, 3].
struct DcPlanes {
  int hb = 0;
  int wb = 0;
  std::vector<float> values;
};

// Requires width and height divisible by 8; the image is expected to be
// range shifted already.
absl::StatusOr<FrequencyTensor> Tensorize(const YcbcrImage& img);
absl::StatusOr<YcbcrImage> Detensorize(const FrequencyTensor& t);

absl::StatusOr<FrequencyTensor> RemoveDc(const FrequencyTensor& t);
absl::StatusOr<DcPlanes> ExtractDc(const FrequencyTensor& t);

// Re-inserts DC channels; std::nullopt fills them with zeros.
absl::StatusOr<FrequencyTensor> InsertDc(const FrequencyTensor& t,
                                         const std::optional<DcPlanes>& dc);

// Fraction of total squared coefficient mass in each channel.
struct EnergyProfile {
  std::vector<double> fractions;

  // Sum over the three DC channels; 0 when the profile has no DC channels.
  double DcFraction() const;
};

absl::StatusOr<EnergyProfile> ComputeEnergyProfile(
    std::span<const FrequencyTensor> tensors);

}  // namespace freqdp

#endif  // FREQDP_BDCT_H_
