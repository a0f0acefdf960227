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

#include "freqdp/margin_loss.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "freqdp/rng.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace freqdp {
namespace {

Eigen::MatrixXd RandomUnitRows(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.Normal();
    m.row(i).normalize();
  }
  return m;
}

// Cross-entropy with logits scale * E W^T and no margin.
double PlainSoftmaxLoss(const Eigen::MatrixXd& e, const std::vector<int>& y,
                        const Eigen::MatrixXd& w, double scale) {
  double total = 0.0;
  for (int b = 0; b < e.rows(); ++b) {
    double z = 0.0;
    for (int c = 0; c < w.rows(); ++c) z += std::exp(scale * e.row(b).dot(w.row(c)));
    total += std::log(z) - scale * e.row(b).dot(w.row(y[b]));
  }
  return total / e.rows();
}

bool Close(double analytic, double numeric, double rel) {
  return std::abs(analytic - numeric) <= rel * std::max(std::abs(analytic), std::abs(numeric)) + 1e-9;
}

class MarginLossTest : public ::testing::TestWithParam<MarginKind> {};

TEST_P(MarginLossTest, ZeroMarginIsNormalizedSoftmax) {
  Rng rng(1);
  const Eigen::MatrixXd e = RandomUnitRows(6, 5, rng);
  const Eigen::MatrixXd w = RandomUnitRows(4, 5, rng);
  const std::vector<int> y = {0, 1, 2, 3, 1, 0};
  ASSERT_OK_AND_ASSIGN(MarginLossResult r, MarginSoftmaxLoss(GetParam(), e, y, w, 10.0, 0.0));
  EXPECT_NEAR(r.loss, PlainSoftmaxLoss(e, y, w, 10.0), 1e-6);
}

TEST_P(MarginLossTest, SingleClassHasZeroLoss) {
  Rng rng(2);
  const Eigen::MatrixXd e = RandomUnitRows(3, 4, rng);
  const Eigen::MatrixXd w = RandomUnitRows(1, 4, rng);
  const std::vector<int> y = {0, 0, 0};
  ASSERT_OK_AND_ASSIGN(MarginLossResult r, MarginSoftmaxLoss(GetParam(), e, y, w, 64.0, 0.3));
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  EXPECT_NEAR(r.grad_embeddings.norm(), 0.0, 1e-12);
  EXPECT_NEAR(r.grad_weights.norm(), 0.0, 1e-12);
}

TEST_P(MarginLossTest, SymmetricGradientsForMirroredClasses) {
  Eigen::MatrixXd w(2, 2);
  w << 1, 0, 0, 1;
  Eigen::MatrixXd e(2, 2);
  const double r2 = std::numbers::sqrt2 / 2;
  e << r2, r2, r2, r2;
  const std::vector<int> y = {0, 1};
  ASSERT_OK_AND_ASSIGN(MarginLossResult r, MarginSoftmaxLoss(GetParam(), e, y, w, 64.0, 0.35));
  EXPECT_NEAR(r.grad_embeddings(0, 0), r.grad_embeddings(1, 1), 1e-12);
  EXPECT_NEAR(r.grad_embeddings(0, 1), r.grad_embeddings(1, 0), 1e-12);
  EXPECT_NEAR(r.grad_weights(0, 0), r.grad_weights(1, 1), 1e-12);
  EXPECT_NEAR(r.grad_weights(0, 1), r.grad_weights(1, 0), 1e-12);
}

TEST_P(MarginLossTest, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  Eigen::MatrixXd e = RandomUnitRows(5, 4, rng);
  Eigen::MatrixXd w = RandomUnitRows(3, 4, rng);
  const std::vector<int> y = {0, 2, 1, 1, 2};
  const double s = 8.0, m = 0.4;
  ASSERT_OK_AND_ASSIGN(MarginLossResult r, MarginSoftmaxLoss(GetParam(), e, y, w, s, m));
  const double h = 1e-6;
  auto loss = [&]() { return MarginSoftmaxLoss(GetParam(), e, y, w, s, m)->loss; };
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double keep = e(i);
    e(i) = keep + h;
    const double up = loss();
    e(i) = keep - h;
    const double down = loss();
    e(i) = keep;
    EXPECT_TRUE(Close(r.grad_embeddings(i), (up - down) / (2 * h), 1e-3)) << "e " << i;
  }
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double keep = w(i);
    w(i) = keep + h;
    const double up = loss();
    w(i) = keep - h;
    const double down = loss();
    w(i) = keep;
    EXPECT_TRUE(Close(r.grad_weights(i), (up - down) / (2 * h), 1e-3)) << "w " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Kinds, MarginLossTest,
                         ::testing::Values(MarginKind::kArcFace, MarginKind::kCosFace),
                         [](const auto& info) { return std::string(MarginKindName(info.param)); });

TEST(MarginLossTargetTest, TargetLogits) {
  // Two classes, one sample: loss = log(1 + exp(other - target)).
  Eigen::MatrixXd w(2, 2);
  w << 1, 0, 0, 1;
  Eigen::MatrixXd e(1, 2);
  const double angle = 0.6;
  e << std::cos(angle), std::sin(angle);
  const std::vector<int> y = {0};
  const double s = 4.0, m = 0.3;
  const double other = s * std::sin(angle);
  ASSERT_OK_AND_ASSIGN(MarginLossResult arc, ArcFaceLoss(e, y, w, s, m));
  EXPECT_NEAR(arc.loss, std::log1p(std::exp(other - s * std::cos(angle + m))), 1e-12);
  ASSERT_OK_AND_ASSIGN(MarginLossResult cos, CosFaceLoss(e, y, w, s, m));
  EXPECT_NEAR(cos.loss, std::log1p(std::exp(other - s * (std::cos(angle) - m))), 1e-12);
}

TEST(MarginLossTargetTest, AlignedEmbeddingStaysFinite) {
  Eigen::MatrixXd w(2, 3);
  w << 1, 0, 0, 0, 1, 0;
  Eigen::MatrixXd e(1, 3);
  e << 1, 0, 0;
  const std::vector<int> y = {0};
  ASSERT_OK_AND_ASSIGN(MarginLossResult r, ArcFaceLoss(e, y, w, 64.0, 0.5));
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_TRUE(r.grad_embeddings.allFinite());
}

TEST(MarginLossTargetTest, ArcFaceTargetLogitIsMonotone) {
  // The other class is orthogonal to every embedding below, so
  // loss = log(1 + exp(-target logit)) and the target logit can be read back.
  Eigen::MatrixXd w(2, 3);
  w << 1, 0, 0, 0, 0, 1;
  const std::vector<int> y = {0};
  double previous = -std::numeric_limits<double>::infinity();
  for (double angle = std::numbers::pi; angle >= 0.0; angle -= 0.01) {
    Eigen::MatrixXd e(1, 3);
    e << std::cos(angle), std::sin(angle), 0;
    ASSERT_OK_AND_ASSIGN(MarginLossResult r, ArcFaceLoss(e, y, w, 8.0, 0.5));
    const double target = -std::log(std::expm1(r.loss));
    EXPECT_GE(target, previous - 1e-9) << "angle " << angle;
    previous = target;
  }
}

TEST(MarginLossTargetTest, Errors) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Identity(2, 2), w = Eigen::MatrixXd::Identity(2, 2);
  const std::vector<int> bad = {0, 2};
  EXPECT_FALSE(ArcFaceLoss(e, bad, w, 1, 0).ok());
  const std::vector<int> short_labels = {0};
  EXPECT_FALSE(ArcFaceLoss(e, short_labels, w, 1, 0).ok());
  EXPECT_FALSE(ArcFaceLoss(e, std::vector<int>{0, 1}, Eigen::MatrixXd::Identity(2, 3), 1, 0).ok());
}

TEST(MarginKindTest, Parse) {
  EXPECT_EQ(*ParseMarginKind("arcface"), MarginKind::kArcFace);
  EXPECT_EQ(*ParseMarginKind("cosface"), MarginKind::kCosFace);
  EXPECT_FALSE(ParseMarginKind("sphereface").ok());
}

}  // namespace
}  // namespace freqdp
