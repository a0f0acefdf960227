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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "freqdp/image.h"
#include "freqdp/rng.h"
#include "freqdp/synthetic.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace freqdp {
namespace {

// Direct double sum over the orthonormal DCT-II definition; block[x * 8 + y].
std::array<double, 64> NaiveDct(const Block8& block) {
  std::array<double, 64> out{};
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      const double au = u == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
      const double av = v == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
      double sum = 0.0;
      for (int x = 0; x < 8; ++x) {
        for (int y = 0; y < 8; ++y) {
          sum += block[x * 8 + y] * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
                 std::cos((2 * y + 1) * v * std::numbers::pi / 16);
        }
      }
      out[u * 8 + v] = au * av * sum;
    }
  }
  return out;
}

Block8 RandomBlock(Rng& rng) {
  Block8 b;
  for (float& v : b) v = static_cast<float>(rng.Uniform01() * 255.0 - 128.0);
  return b;
}

TEST(Dct8Test, ZeroBlock) {
  Block8 zero{};
  for (float v : Dct8Forward(zero)) EXPECT_EQ(v, 0.f);
  for (float v : Dct8Inverse(zero)) EXPECT_EQ(v, 0.f);
}

TEST(Dct8Test, ConstantBlockHasOnlyDc) {
  Block8 c;
  c.fill(3.5f);
  const Block8 f = Dct8Forward(c);
  EXPECT_NEAR(f[0], 8 * 3.5, 1e-5);
  for (int i = 1; i < 64; ++i) EXPECT_NEAR(f[i], 0.0, 1e-5);
}

TEST(Dct8Test, DcOnlyInvertsToConstant) {
  Block8 f{};
  f[0] = 8.f;
  for (float v : Dct8Inverse(f)) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Dct8Test, MatchesNaiveOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Block8 b = RandomBlock(rng);
    const Block8 f = Dct8Forward(b);
    const auto want = NaiveDct(b);
    for (int i = 0; i < 64; ++i) ASSERT_NEAR(f[i], want[i], 1e-5 * std::max(1.0, std::abs(want[i])));
  }
}

TEST(Dct8Test, RoundTrip) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Block8 b = RandomBlock(rng);
    const Block8 back = Dct8Inverse(Dct8Forward(b));
    for (int i = 0; i < 64; ++i) ASSERT_NEAR(back[i], b[i], 1e-4);
  }
}

TEST(Dct8Test, BasisIsOrthonormal) {
  const auto& d = Dct8Basis();
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 8; ++k) dot += d[i * 8 + k] * d[j * 8 + k];
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-6);
    }
  }
}

TEST(Dct8Test, Parseval) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Block8 b = RandomBlock(rng);
    const Block8 f = Dct8Forward(b);
    double eb = 0.0, ef = 0.0;
    for (int i = 0; i < 64; ++i) {
      eb += double(b[i]) * b[i];
      ef += double(f[i]) * f[i];
    }
    EXPECT_NEAR(ef, eb, 1e-4 * eb);
  }
}

TEST(ChannelRemapTest, Bijection) {
  std::set<int> seen;
  for (int s = 0; s < kChannelsWithoutDc; ++s) {
    const int f = StrippedToFullChannel(s);
    ASSERT_GE(f, 0);
    ASSERT_LT(f, kChannelsWithDc);
    ASSERT_NE(f % 64, 0);
    seen.insert(f);
    ASSERT_EQ(FullToStrippedChannel(f), s);
  }
  EXPECT_EQ(seen.size(), size_t(kChannelsWithoutDc));
  for (int dc : kDcChannels) EXPECT_FALSE(FullToStrippedChannel(dc).has_value());
}

YcbcrImage ConstantImage(int w, int h, float y, float cb, float cr) {
  YcbcrImage img(w, h);
  for (size_t p = 0; p < size_t(w) * h; ++p) {
    img.data[p * 3] = y;
    img.data[p * 3 + 1] = cb;
    img.data[p * 3 + 2] = cr;
  }
  return img;
}

YcbcrImage RandomShifted(int w, int h, Rng& rng) {
  return ShiftRange(RgbToYcbcr(RandomImage(w, h, rng)));
}

TEST(TensorizeTest, ConstantImageLivesInDc) {
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t, Tensorize(ConstantImage(16, 8, 5.f, -2.f, 1.f)));
  EXPECT_EQ(t.hb, 1);
  EXPECT_EQ(t.wb, 2);
  EXPECT_EQ(t.channels, 192);
  EXPECT_TRUE(t.dc_present);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(t.at(0, j, 0), 40.f, 1e-4);
    EXPECT_NEAR(t.at(0, j, 64), -16.f, 1e-4);
    EXPECT_NEAR(t.at(0, j, 128), 8.f, 1e-4);
    for (int k = 0; k < 192; ++k) {
      if (k % 64 != 0) EXPECT_NEAR(t.at(0, j, k), 0.f, 1e-4);
    }
  }
}

TEST(TensorizeTest, SingleBlockMatchesPerPlaneDct) {
  Rng rng(4);
  const YcbcrImage img = RandomShifted(8, 8, rng);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t, Tensorize(img));
  for (int c = 0; c < 3; ++c) {
    Block8 b;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) b[y * 8 + x] = img.at(x, y, c);
    }
    const auto want = NaiveDct(b);
    for (int i = 0; i < 64; ++i) EXPECT_NEAR(t.at(0, 0, c * 64 + i), want[i], 1e-3);
  }
}

TEST(TensorizeTest, RoundTrip) {
  Rng rng(5);
  const YcbcrImage img = RandomShifted(32, 24, rng);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t, Tensorize(img));
  ASSERT_OK_AND_ASSIGN(YcbcrImage back, Detensorize(t));
  ASSERT_EQ(back.width, 32);
  ASSERT_EQ(back.height, 24);
  for (size_t i = 0; i < img.data.size(); ++i) ASSERT_NEAR(back.data[i], img.data[i], 1e-3);
}

TEST(TensorizeTest, RejectsIndivisibleDims) {
  EXPECT_EQ(Tensorize(YcbcrImage(12, 8)).status().code(), absl::StatusCode::kInvalidArgument);
}

TEST(DcTest, RemoveAndReinsertIsIdentity) {
  Rng rng(6);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t, Tensorize(RandomShifted(16, 16, rng)));
  ASSERT_OK_AND_ASSIGN(FrequencyTensor ac, RemoveDc(t));
  EXPECT_EQ(ac.channels, 189);
  EXPECT_FALSE(ac.dc_present);
  for (int s = 0; s < 189; ++s) EXPECT_EQ(ac.at(1, 0, s), t.at(1, 0, StrippedToFullChannel(s)));
  ASSERT_OK_AND_ASSIGN(DcPlanes dc, ExtractDc(t));
  ASSERT_OK_AND_ASSIGN(FrequencyTensor back, InsertDc(ac, dc));
  EXPECT_EQ(back, t);
}

TEST(DcTest, ConstantImageHasZeroAc) {
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t, Tensorize(ConstantImage(16, 16, 9.f, 3.f, -7.f)));
  ASSERT_OK_AND_ASSIGN(FrequencyTensor ac, RemoveDc(t));
  for (float v : ac.values) EXPECT_NEAR(v, 0.f, 1e-4);
}

TEST(DcTest, ZeroFillAndForeignDc) {
  Rng rng(7);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor a, Tensorize(RandomShifted(16, 8, rng)));
  ASSERT_OK_AND_ASSIGN(FrequencyTensor b, Tensorize(RandomShifted(16, 8, rng)));
  ASSERT_OK_AND_ASSIGN(FrequencyTensor ac, RemoveDc(a));
  ASSERT_OK_AND_ASSIGN(FrequencyTensor zero, InsertDc(ac, std::nullopt));
  for (int dc : kDcChannels) EXPECT_EQ(zero.at(0, 1, dc), 0.f);
  ASSERT_OK_AND_ASSIGN(DcPlanes b_dc, ExtractDc(b));
  ASSERT_OK_AND_ASSIGN(FrequencyTensor mixed, InsertDc(ac, b_dc));
  for (int dc : kDcChannels) EXPECT_EQ(mixed.at(0, 1, dc), b.at(0, 1, dc));
  EXPECT_EQ(mixed.at(0, 1, 5), a.at(0, 1, 5));
}

TEST(DcTest, Errors) {
  FrequencyTensor ac(1, 1, 189);
  EXPECT_FALSE(RemoveDc(ac).ok());
  EXPECT_EQ(Detensorize(ac).status().code(), absl::StatusCode::kFailedPrecondition);
  DcPlanes wrong{2, 1, std::vector<float>(6)};
  EXPECT_FALSE(InsertDc(ac, wrong).ok());
  EXPECT_FALSE(InsertDc(FrequencyTensor(1, 1, 192), std::nullopt).ok());
}

TEST(EnergyProfileTest, ConstantImageAllDc) {
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t, Tensorize(ConstantImage(16, 16, 10.f, 5.f, 3.f)));
  ASSERT_OK_AND_ASSIGN(EnergyProfile p, ComputeEnergyProfile({&t, 1}));
  EXPECT_NEAR(p.DcFraction(), 1.0, 1e-9);
}

TEST(EnergyProfileTest, WhiteNoiseNearUniform) {
  Rng rng(8);
  // Noise around the shifted zero level so the DC channels carry no mean offset.
  std::vector<FrequencyTensor> ts;
  for (int i = 0; i < 4; ++i) {
    YcbcrImage img(64, 64);
    for (float& v : img.data) v = static_cast<float>(rng.Normal() * 30.0);
    ASSERT_OK_AND_ASSIGN(FrequencyTensor t, Tensorize(img));
    ts.push_back(std::move(t));
  }
  ASSERT_OK_AND_ASSIGN(EnergyProfile p, ComputeEnergyProfile(ts));
  double sum = 0.0;
  for (double f : p.fractions) {
    sum += f;
    EXPECT_GT(f, 1.0 / 192 / 3);
    EXPECT_LT(f, 3.0 / 192);
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(EnergyProfileTest, RandomRgbImageWithinFactorThree) {
  Rng rng(9);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t, Tensorize(RandomShifted(64, 64, rng)));
  ASSERT_OK_AND_ASSIGN(EnergyProfile p, ComputeEnergyProfile({&t, 1}));
  for (double f : p.fractions) {
    EXPECT_GT(f, 1.0 / 192 / 3);
    EXPECT_LT(f, 3.0 / 192);
  }
}

TEST(EnergyProfileTest, GradientIsDcDominant) {
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t,
                       Tensorize(ShiftRange(RgbToYcbcr(GradientImage(64, 64)))));
  ASSERT_OK_AND_ASSIGN(EnergyProfile p, ComputeEnergyProfile({&t, 1}));
  EXPECT_GT(p.DcFraction(), 0.8);
}

TEST(EnergyProfileTest, EmptyAndMismatched) {
  EXPECT_FALSE(ComputeEnergyProfile({}).ok());
  std::vector<FrequencyTensor> ts = {FrequencyTensor(1, 1, 192), FrequencyTensor(1, 1, 189)};
  EXPECT_FALSE(ComputeEnergyProfile(ts).ok());
  // Images of different sizes pool their per-channel energy.
  std::vector<FrequencyTensor> sizes = {FrequencyTensor(1, 1, 192), FrequencyTensor(1, 2, 192)};
  EXPECT_OK(ComputeEnergyProfile(sizes));
}

}  // namespace
}  // namespace freqdp
