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

#include "freqdp/recognizer.h"

#include <cmath>

#include "gradient_check.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace freqdp {
namespace {

TEST(RecognizerTest, ParameterCount) {
  RecognizerShape shape{10, 6, 4, 3};
  EXPECT_EQ(shape.ParameterCount(), 6 * 10 + 6 + 4 * 6 + 4 + 3 * 4);
  Rng rng(1);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create(shape, rng));
  EXPECT_EQ(model.params().size(), shape.ParameterCount());
  EXPECT_FALSE(ToyRecognizer::Create(RecognizerShape{0, 6, 4, 3}, rng).ok());
}

TEST(RecognizerTest, EmbeddingsAndClassWeightsAreUnitNorm) {
  Rng rng(2);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create({12, 16, 8, 5}, rng));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(20, 12) * 30.0;
  const Eigen::MatrixXd e = model.Embed(x);
  for (Eigen::Index i = 0; i < e.rows(); ++i) EXPECT_NEAR(e.row(i).norm(), 1.0, 1e-5);
  const Eigen::MatrixXd w = model.NormalizedClassWeights();
  for (Eigen::Index i = 0; i < w.rows(); ++i) EXPECT_NEAR(w.row(i).norm(), 1.0, 1e-12);
}

TEST(RecognizerTest, InputNormalizationFromSensitivity) {
  Rng rng(3);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create({3, 4, 2, 2}, rng));
  SensitivityMap s;
  s.hb = s.wb = 1;
  s.channels = 3;
  s.r_min = {-2.f, 0.f, 5.f};
  s.r_max = {2.f, 10.f, 5.f};
  ASSERT_OK(model.SetInputNormalization(s));
  EXPECT_DOUBLE_EQ(model.input_centre()(1), 5.0);
  EXPECT_DOUBLE_EQ(model.input_inv_scale()(0), 0.25);
  EXPECT_DOUBLE_EQ(model.input_inv_scale()(2), 0.0);
  s.r_min.pop_back();
  s.r_max.pop_back();
  EXPECT_FALSE(model.SetInputNormalization(s).ok());
}

TEST(RecognizerTest, InputGradientMatchesFiniteDifferences) {
  Rng rng(4);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create({5, 7, 3, 3}, rng));
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 5);
  const std::vector<int> y = {0, 1, 2, 0};
  for (MarginKind kind : {MarginKind::kArcFace, MarginKind::kCosFace}) {
    ASSERT_OK_AND_ASSIGN(auto lg, model.LossAndGradient(x, y, kind, 8.0, 0.3));
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double keep = x(i);
      x(i) = keep + h;
      const double up = model.LossAndGradient(x, y, kind, 8.0, 0.3)->loss;
      x(i) = keep - h;
      const double down = model.LossAndGradient(x, y, kind, 8.0, 0.3)->loss;
      x(i) = keep;
      EXPECT_LT(testing::RelativeError(lg.grad_inputs(i), (up - down) / (2 * h)), 1e-3);
    }
  }
}

TEST(RecognizerTest, ParameterGradientMatchesFiniteDifferences) {
  Rng rng(5);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create({4, 6, 3, 3}, rng));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 4);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2};
  ASSERT_OK_AND_ASSIGN(auto lg, model.LossAndGradient(x, y, MarginKind::kArcFace, 16.0, 0.5));
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < model.params().size(); ++i) {
    const double keep = model.params()(i);
    model.params()(i) = keep + h;
    const double up = model.LossAndGradient(x, y, MarginKind::kArcFace, 16.0, 0.5)->loss;
    model.params()(i) = keep - h;
    const double down = model.LossAndGradient(x, y, MarginKind::kArcFace, 16.0, 0.5)->loss;
    model.params()(i) = keep;
    EXPECT_LT(testing::RelativeError(lg.grad_params(i), (up - down) / (2 * h)), 1e-3) << i;
  }
}

TEST(RecognizerTest, ClassifyPicksNearestClassWeight) {
  Rng rng(6);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create({3, 5, 4, 4}, rng));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
  const Eigen::MatrixXd cos = model.Embed(x) * model.NormalizedClassWeights().transpose();
  const auto pred = model.Classify(x);
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    for (Eigen::Index c = 0; c < cos.cols(); ++c) EXPECT_GE(cos(b, pred[b]), cos(b, c));
  }
}

TEST(RecognizerTest, RejectsWrongInputWidth) {
  Rng rng(7);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create({3, 5, 4, 2}, rng));
  EXPECT_FALSE(model.LossAndGradient(Eigen::MatrixXd::Zero(2, 4), std::vector<int>{0, 1},
                                     MarginKind::kArcFace, 8, 0.1)
                   .ok());
}

}  // namespace
}  // namespace freqdp
