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

#include "freqdp/serialization.h"

#include <fstream>

#include "freqdp/rng.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace freqdp {
namespace {

SensitivityMap RandomMap(Rng& rng) {
  SensitivityMap s;
  s.hb = 2;
  s.wb = 1;
  s.dataset_id = "toy";
  s.image_count = 12;
  for (int p = 0; p < 2 * 189; ++p) {
    const float lo = static_cast<float>(-10 * rng.Uniform01());
    s.r_min.push_back(lo);
    s.r_max.push_back(p % 50 == 0 ? lo : static_cast<float>(10 * rng.Uniform01()));
  }
  return s;
}

TEST(SensitivitySerializationTest, RoundTrip) {
  const auto dir = testing::ScratchDir("s");
  Rng rng(1);
  const SensitivityMap s = RandomMap(rng);
  ASSERT_OK(SaveSensitivityMap(s, dir));
  ASSERT_OK_AND_ASSIGN(SensitivityMap back, LoadSensitivityMap(dir));
  EXPECT_EQ(back.r_min, s.r_min);
  EXPECT_EQ(back.r_max, s.r_max);
  EXPECT_EQ(back.hb, 2);
  EXPECT_EQ(back.dataset_id, "toy");
  EXPECT_EQ(back.image_count, 12);
  EXPECT_EQ(SensitivityFingerprint(back), SensitivityFingerprint(s));
}

TEST(SensitivitySerializationTest, ManifestFields) {
  const auto dir = testing::ScratchDir("s");
  Rng rng(2);
  setenv("SOURCE_DATE_EPOCH", "0", 1);
  ASSERT_OK(SaveSensitivityMap(RandomMap(rng), dir));
  unsetenv("SOURCE_DATE_EPOCH");
  std::ifstream in(dir / "sensitivity.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_EQ(j["shape"], nlohmann::json({2, 1, 189}));
  EXPECT_EQ(j["image_count"], 12);
  EXPECT_EQ(j["zero_range_positions"], 8);
  EXPECT_EQ(j["created_at"], "1970-01-01T00:00:00Z");
}

TEST(SensitivitySerializationTest, TamperedBoundsRejected) {
  const auto dir = testing::ScratchDir("s");
  Rng rng(3);
  ASSERT_OK(SaveSensitivityMap(RandomMap(rng), dir));
  std::fstream f(dir / "sensitivity_max.fdp", std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(40);
  f.put('\x7f');
  f.close();
  EXPECT_EQ(LoadSensitivityMap(dir).status().code(), absl::StatusCode::kDataLoss);
}

TEST(BudgetSerializationTest, RoundTrip) {
  const auto dir = testing::ScratchDir("b");
  Rng rng(4);
  const SensitivityMap s = RandomMap(rng);
  std::vector<float> theta(s.size());
  for (float& t : theta) t = static_cast<float>(rng.Normal());
  ASSERT_OK_AND_ASSIGN(BudgetAllocation b, AllocateBudgets(s, theta, 7.5));
  ASSERT_OK(SaveBudgetAllocation(b, s, {{"checkpoint_sha256", "abc"}}, dir));
  ASSERT_OK_AND_ASSIGN(BudgetAllocation back, LoadBudgetAllocation(s, dir));
  EXPECT_EQ(back.theta, b.theta);
  EXPECT_EQ(back.epsilon_total, 7.5);
  EXPECT_EQ(back.budgets, b.budgets);
}

TEST(TrainConfigJsonTest, RoundTrip) {
  TrainConfig cfg = TrainConfig::ForLoss(MarginKind::kCosFace);
  cfg.epochs = 7;
  cfg.seed = 1234567890123ull;
  cfg.learn_theta = false;
  ASSERT_OK_AND_ASSIGN(TrainConfig back, TrainConfigFromJson(ToJson(cfg)));
  EXPECT_EQ(ToJson(back), ToJson(cfg));
  EXPECT_EQ(back.loss, MarginKind::kCosFace);
  EXPECT_FALSE(TrainConfigFromJson(nlohmann::json{{"loss", "nope"}}).ok());
  EXPECT_FALSE(TrainConfigFromJson(nlohmann::json{{"epochs", "many"}}).ok());
}

}  // namespace
}  // namespace freqdp
