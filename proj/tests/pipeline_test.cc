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

#include "freqdp/pipeline.h"

#include <cmath>

#include "freqdp/rng.h"
#include "freqdp/synthetic.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace freqdp {
namespace {

TEST(PipelineTest, ShapeAfterUpsampling) {
  Rng rng(1);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t, ForwardTransform(RandomImage(12, 8, rng), {}));
  EXPECT_EQ(t.hb, 8);
  EXPECT_EQ(t.wb, 12);
  EXPECT_EQ(t.channels, 192);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor s, ForwardTransformNoDc(RandomImage(12, 8, rng), {}));
  EXPECT_EQ(s.channels, 189);
}

TEST(PipelineTest, RoundTripBothKernels) {
  Rng rng(2);
  const RgbImage img = RandomImage(16, 16, rng);
  for (auto kernel : {UpsampleKernel::kNearest, UpsampleKernel::kBilinear}) {
    TransformConfig cfg{8, kernel};
    ASSERT_OK_AND_ASSIGN(FrequencyTensor t, ForwardTransform(img, cfg));
    ASSERT_OK_AND_ASSIGN(RgbImage back, InverseTransform(t, cfg));
    for (size_t i = 0; i < img.data.size(); ++i) {
      ASSERT_LE(std::abs(int(img.data[i]) - int(back.data[i])), 1);
    }
  }
}

TEST(PipelineTest, NearestUpsamplingLeavesNoAcEnergy) {
  // Every 8x8 block of a x8 nearest-upsampled image is constant.
  Rng rng(3);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor t,
                       ForwardTransformNoDc(RandomImage(4, 4, rng), {8, UpsampleKernel::kNearest}));
  for (float v : t.values) EXPECT_NEAR(v, 0.f, 1e-3);
  ASSERT_OK_AND_ASSIGN(FrequencyTensor b,
                       ForwardTransformNoDc(RandomImage(4, 4, rng), {8, UpsampleKernel::kBilinear}));
  double energy = 0.0;
  for (float v : b.values) energy += double(v) * v;
  EXPECT_GT(energy, 1.0);
}

TEST(PipelineTest, NoUpsamplingNeedsDivisibleDims) {
  Rng rng(4);
  EXPECT_FALSE(ForwardTransform(RandomImage(12, 8, rng), {1, UpsampleKernel::kNearest}).ok());
  EXPECT_OK(ForwardTransform(RandomImage(16, 8, rng), {1, UpsampleKernel::kNearest}));
}

}  // namespace
}  // namespace freqdp
