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

#include "freqdp/bdct.h"

#include <cmath>
#include <numbers>

#include "absl/strings/str_cat.h"

namespace freqdp {
namespace {

std::array<double, 64> MakeBasis() {
  std::array<double, 64> d{};
  for (int u = 0; u < 8; ++u) {
    const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int x = 0; x < 8; ++x) {
      d[u * 8 + x] = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
  }
  return d;
}

// D * in * D^T, or D^T * in * D when `transpose` is set.
Block8 Sandwich(const Block8& in, bool transpose) {
  const auto& d = Dct8Basis();
  auto m = [&](int r, int c) { return transpose ? d[c * 8 + r] : d[r * 8 + c]; };
  std::array<double, 64> tmp{};
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += m(r, k) * in[k * 8 + c];
      tmp[r * 8 + c] = acc;
    }
  }
  Block8 out{};
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += tmp[r * 8 + k] * m(c, k);
      out[r * 8 + c] = static_cast<float>(acc);
    }
  }
  return out;
}

bool IsDcChannel(int k) { return k == 0 || k == 64 || k == 128; }

}  // namespace

const std::array<double, 64>& Dct8Basis() {
  static const std::array<double, 64> basis = MakeBasis();
  return basis;
}

Block8 Dct8Forward(const Block8& block) { return Sandwich(block, false); }

Block8 Dct8Inverse(const Block8& coeffs) { return Sandwich(coeffs, true); }

int StrippedToFullChannel(int stripped) {
  // Each color plane loses its first channel.
  return stripped + stripped / 63 + 1;
}

std::optional<int> FullToStrippedChannel(int full) {
  if (full < 0 || full >= kChannelsWithDc || IsDcChannel(full)) {
    return std::nullopt;
  }
  return full - full / 64 - 1;
}

absl::StatusOr<FrequencyTensor> Tensorize(const YcbcrImage& img) {
  if (img.width <= 0 || img.height <= 0 || img.width % 8 != 0 ||
      img.height % 8 != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "image ", img.width, "x", img.height, " is not divisible into 8x8 blocks"));
  }
  FrequencyTensor t(img.height / 8, img.width / 8, kChannelsWithDc);
  Block8 block;
  for (int i = 0; i < t.hb; ++i) {
    for (int j = 0; j < t.wb; ++j) {
      for (int c = 0; c < 3; ++c) {
        for (int x = 0; x < 8; ++x) {
          for (int y = 0; y < 8; ++y) {
            block[x * 8 + y] = img.at(j * 8 + y, i * 8 + x, c);
          }
        }
        const Block8 coeffs = Dct8Forward(block);
        float* dst = &t.values[t.index(i, j, c * 64)];
        std::copy(coeffs.begin(), coeffs.end(), dst);
      }
    }
  }
  return t;
}

absl::StatusOr<YcbcrImage> Detensorize(const FrequencyTensor& t) {
  if (!t.dc_present || t.channels != kChannelsWithDc) {
    return absl::FailedPreconditionError(
        "tensor has no DC channels; call InsertDc first");
  }
  if (t.values.size() != size_t(t.hb) * t.wb * t.channels) {
    return absl::InvalidArgumentError("tensor buffer size does not match shape");
  }
  YcbcrImage img(t.wb * 8, t.hb * 8);
  Block8 coeffs;
  for (int i = 0; i < t.hb; ++i) {
    for (int j = 0; j < t.wb; ++j) {
      for (int c = 0; c < 3; ++c) {
        const float* src = &t.values[t.index(i, j, c * 64)];
        std::copy(src, src + 64, coeffs.begin());
        const Block8 block = Dct8Inverse(coeffs);
        for (int x = 0; x < 8; ++x) {
          for (int y = 0; y < 8; ++y) {
            img.at(j * 8 + y, i * 8 + x, c) = block[x * 8 + y];
          }
        }
      }
    }
  }
  return img;
}

absl::StatusOr<FrequencyTensor> RemoveDc(const FrequencyTensor& t) {
  if (!t.dc_present || t.channels != kChannelsWithDc) {
    return absl::FailedPreconditionError("DC channels already removed");
  }
  FrequencyTensor out(t.hb, t.wb, kChannelsWithoutDc);
  out.colorspace = t.colorspace;
  for (int i = 0; i < t.hb; ++i) {
    for (int j = 0; j < t.wb; ++j) {
      for (int k = 0; k < kChannelsWithoutDc; ++k) {
        out.at(i, j, k) = t.at(i, j, StrippedToFullChannel(k));
      }
    }
  }
  return out;
}

absl::StatusOr<DcPlanes> ExtractDc(const FrequencyTensor& t) {
  if (!t.dc_present) return absl::FailedPreconditionError("tensor has no DC");
  DcPlanes dc{t.hb, t.wb, std::vector<float>(size_t(t.hb) * t.wb * 3)};
  for (int i = 0; i < t.hb; ++i) {
    for (int j = 0; j < t.wb; ++j) {
      for (int c = 0; c < 3; ++c) {
        dc.values[(size_t(i) * t.wb + j) * 3 + c] = t.at(i, j, kDcChannels[c]);
      }
    }
  }
  return dc;
}

absl::StatusOr<FrequencyTensor> InsertDc(const FrequencyTensor& t,
                                         const std::optional<DcPlanes>& dc) {
  if (t.dc_present || t.channels != kChannelsWithoutDc) {
    return absl::FailedPreconditionError("tensor already has DC channels");
  }
  if (dc.has_value() &&
      (dc->hb != t.hb || dc->wb != t.wb ||
       dc->values.size() != size_t(t.hb) * t.wb * 3)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "DC planes ", dc->hb, "x", dc->wb, " do not match tensor ", t.hb, "x", t.wb));
  }
  FrequencyTensor out(t.hb, t.wb, kChannelsWithDc);
  out.colorspace = t.colorspace;
  for (int i = 0; i < t.hb; ++i) {
    for (int j = 0; j < t.wb; ++j) {
      for (int k = 0; k < kChannelsWithoutDc; ++k) {
        out.at(i, j, StrippedToFullChannel(k)) = t.at(i, j, k);
      }
      if (dc.has_value()) {
        for (int c = 0; c < 3; ++c) {
          out.at(i, j, kDcChannels[c]) = dc->values[(size_t(i) * t.wb + j) * 3 + c];
        }
      }
    }
  }
  return out;
}

double EnergyProfile::DcFraction() const {
  if (fractions.size() != size_t(kChannelsWithDc)) return 0.0;
  return fractions[0] + fractions[64] + fractions[128];
}

absl::StatusOr<EnergyProfile> ComputeEnergyProfile(
    std::span<const FrequencyTensor> tensors) {
  if (tensors.empty()) return absl::InvalidArgumentError("no tensors given");
  const int channels = tensors.front().channels;
  std::vector<double> energy(channels, 0.0);
  for (const auto& t : tensors) {
    if (t.channels != channels) {
      return absl::InvalidArgumentError("tensors have inconsistent channel counts");
    }
    for (size_t p = 0; p < t.values.size(); ++p) {
      const double v = t.values[p];
      energy[p % channels] += v * v;
    }
  }
  double total = 0.0;
  for (double e : energy) total += e;
  EnergyProfile profile;
  profile.fractions.assign(channels, 0.0);
  if (total > 0.0) {
    for (int k = 0; k < channels; ++k) profile.fractions[k] = energy[k] / total;
  }
  return profile;
}

}  // namespace freqdp
