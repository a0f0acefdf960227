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

#include "freqdp/budget_learner.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "freqdp/synthetic.h"
#include "gradient_check.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace freqdp {
namespace {

struct InformativeData {
  LabeledSet train;
  LabeledSet test;
  SensitivityMap sensitivity;
  std::vector<size_t> informative;
};

InformativeData MakeInformative(uint64_t seed, int per_class = 100) {
  InformativeTensorConfig cfg;
  cfg.per_class = per_class;
  cfg.seed = seed;
  LabeledTensors all = GenerateInformativeTensors(cfg);
  std::vector<FrequencyTensor> train_t, test_t;
  std::vector<int> train_y, test_y;
  for (size_t i = 0; i < all.tensors.size(); ++i) {
    if (i % 4 == 3) {
      test_t.push_back(all.tensors[i]);
      test_y.push_back(all.labels[i]);
    } else {
      train_t.push_back(all.tensors[i]);
      train_y.push_back(all.labels[i]);
    }
  }
  InformativeData d;
  d.train = *MakeLabeledSet(train_t, train_y);
  d.test = *MakeLabeledSet(test_t, test_y);
  d.sensitivity = *CalibrateSensitivity(all.tensors, "informative");
  d.informative = all.informative_positions;
  return d;
}

TrainConfig SmallConfig(uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 32;
  cfg.hidden_dim = 32;
  cfg.embed_dim = 16;
  cfg.scale = 16.0;
  cfg.margin = 0.2;
  cfg.seed = seed;
  return cfg;
}

TEST(BudgetLayerTest, SharesSumToOne) {
  InformativeData d = MakeInformative(1, 10);
  ASSERT_OK_AND_ASSIGN(BudgetLayer layer, BudgetLayer::Create(d.sensitivity, 3.0));
  EXPECT_NEAR(layer.shares().sum(), 1.0, 1e-12);
  Eigen::VectorXd theta = Eigen::VectorXd::Random(layer.theta().size()) * 4;
  ASSERT_OK(layer.SetTheta(theta));
  const BudgetAllocation b = layer.Allocation();
  EXPECT_NEAR(std::accumulate(b.budgets.begin(), b.budgets.end(), 0.0), 3.0, 3e-5);
}

TEST(BudgetLayerTest, MoreThetaMeansLessNoise) {
  InformativeData d = MakeInformative(2, 10);
  ASSERT_OK_AND_ASSIGN(BudgetLayer layer, BudgetLayer::Create(d.sensitivity, 3.0));
  const double before = layer.scales()(7);
  Eigen::VectorXd theta = layer.theta();
  theta(7) += 0.5;
  ASSERT_OK(layer.SetTheta(theta));
  EXPECT_LT(layer.scales()(7), before);
  // d sigma_p / d theta_p = -sigma_p (1 - share_p) < 0.
  Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(1, theta.size());
  unit(0, 7) = 1.0;
  Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(1, theta.size());
  grad_out(0, 7) = 1.0;
  const Eigen::VectorXd g = layer.ThetaGradient(grad_out, unit);
  EXPECT_NEAR(g(7), -layer.scales()(7) * (1 - layer.shares()(7)), 1e-9);
}

TEST(BudgetLayerTest, RejectsDegenerateInputs) {
  SensitivityMap s;
  s.hb = s.wb = 1;
  s.r_min.assign(189, 0.f);
  s.r_max.assign(189, 0.f);
  EXPECT_FALSE(BudgetLayer::Create(s, 1.0).ok());
  s.r_max[0] = 1.f;
  EXPECT_FALSE(BudgetLayer::Create(s, 0.0).ok());
}

TEST(GradientTest, FullPipelineMatchesFiniteDifferences) {
  for (MarginKind kind : {MarginKind::kArcFace, MarginKind::kCosFace}) {
    testing::PipelineInstance inst = testing::MakePipelineInstance(7, kind);
    const auto r = testing::CheckPipelineGradients(inst);
    EXPECT_LE(r.parameters, 500);
    EXPECT_LT(r.max_rel_error, 1e-3) << MarginKindName(kind);
  }
}

TEST(ReparamTest, ForwardReproducibleAndConsistent) {
  InformativeData d = MakeInformative(3, 5);
  FrequencyTensor t(1, 1, 189);
  for (int p = 0; p < 189; ++p) t.values[p] = static_cast<float>(d.train.features(0, p));
  std::vector<float> theta(189, 0.f);
  theta[4] = 2.f;
  Rng a(11), b(11);
  ASSERT_OK_AND_ASSIGN(ReparamSample s1, ReparamPerturbForward(t, d.sensitivity, theta, 5.0, a));
  ASSERT_OK_AND_ASSIGN(ReparamSample s2, ReparamPerturbForward(t, d.sensitivity, theta, 5.0, b));
  EXPECT_EQ(s1.perturbed, s2.perturbed);
  EXPECT_EQ(s1.unit_noise, s2.unit_noise);

  ASSERT_OK_AND_ASSIGN(BudgetAllocation alloc, AllocateBudgets(d.sensitivity, theta, 5.0));
  ASSERT_OK_AND_ASSIGN(std::vector<double> scales, ComputeNoiseScales(d.sensitivity, alloc));
  for (int p = 0; p < 189; ++p) {
    EXPECT_NEAR(s1.perturbed.values[p], t.values[p] + scales[p] * s1.unit_noise[p],
                1e-4 * std::max(1.0, std::abs(double(s1.perturbed.values[p]))));
  }
}

TEST(LearningRateTest, ProportionalMilestones) {
  EXPECT_DOUBLE_EQ(LearningRateFactor(0, 24), 1.0);
  EXPECT_DOUBLE_EQ(LearningRateFactor(9, 24), 1.0);
  EXPECT_NEAR(LearningRateFactor(10, 24), 0.1, 1e-15);
  EXPECT_NEAR(LearningRateFactor(18, 24), 0.01, 1e-15);
  EXPECT_NEAR(LearningRateFactor(22, 24), 0.001, 1e-15);
  EXPECT_NEAR(LearningRateFactor(5, 12), 0.1, 1e-15);
}

TEST(TrainConfigTest, Validation) {
  EXPECT_OK(TrainConfig().Validate());
  EXPECT_DOUBLE_EQ(TrainConfig::ForLoss(MarginKind::kCosFace).margin, 0.35);
  EXPECT_DOUBLE_EQ(TrainConfig::ForLoss(MarginKind::kArcFace).margin, 0.4);
  TrainConfig bad;
  bad.margin = 1.6;
  EXPECT_FALSE(bad.Validate().ok());
  bad = TrainConfig();
  bad.epsilon_total = 0;
  EXPECT_FALSE(bad.Validate().ok());
  bad = TrainConfig();
  bad.momentum = 1.0;
  EXPECT_FALSE(bad.Validate().ok());
  bad = TrainConfig();
  bad.warmup_epochs = bad.epochs;
  EXPECT_FALSE(bad.Validate().ok());
  bad.warmup_epochs = -1;
  EXPECT_FALSE(bad.Validate().ok());
}

TEST(TrainTest, RejectsTooFewSamples) {
  InformativeData d = MakeInformative(4, 10);
  LabeledSet tiny = d.train;
  tiny.num_classes = 5;  // class 4 has no samples
  EXPECT_FALSE(TrainBudgets(tiny, d.sensitivity, SmallConfig(1)).ok());
}

TEST(TrainTest, BudgetConservedAndDeterministic) {
  InformativeData d = MakeInformative(5, 40);
  TrainConfig cfg = SmallConfig(3);
  cfg.epochs = 4;
  cfg.epsilon_total = 0.5 * 189;
  ASSERT_OK_AND_ASSIGN(TrainResult a, TrainBudgets(d.train, d.sensitivity, cfg));
  ASSERT_OK_AND_ASSIGN(TrainResult b, TrainBudgets(d.train, d.sensitivity, cfg));
  EXPECT_FALSE(a.diverged);
  EXPECT_EQ(a.state.theta, b.state.theta);
  EXPECT_EQ(a.state.model.params(), b.state.model.params());
  ASSERT_EQ(a.state.history.size(), 4u);
  std::vector<float> theta(a.state.theta.begin(), a.state.theta.end());
  ASSERT_OK_AND_ASSIGN(BudgetAllocation alloc, AllocateBudgets(d.sensitivity, theta, cfg.epsilon_total));
  EXPECT_NEAR(std::accumulate(alloc.budgets.begin(), alloc.budgets.end(), 0.0) / cfg.epsilon_total,
              1.0, 1e-5);
}

TEST(TrainTest, ResumeMatchesUninterruptedRun) {
  InformativeData d = MakeInformative(6, 30);
  TrainConfig cfg = SmallConfig(4);
  cfg.epochs = 4;
  cfg.epsilon_total = 50;
  ASSERT_OK_AND_ASSIGN(TrainResult full, TrainBudgets(d.train, d.sensitivity, cfg));
  TrainConfig chunk = cfg;
  chunk.max_epochs_per_call = 2;
  ASSERT_OK_AND_ASSIGN(TrainResult first, TrainBudgets(d.train, d.sensitivity, chunk));
  EXPECT_EQ(first.state.epochs_done, 2);
  ASSERT_OK_AND_ASSIGN(TrainResult second,
                       TrainBudgets(d.train, d.sensitivity, chunk, &first.state));
  EXPECT_EQ(second.state.epochs_done, 4);
  ASSERT_EQ(second.state.history.size(), 4u);
  EXPECT_EQ(second.state.theta, full.state.theta);
  EXPECT_EQ(second.state.model.params(), full.state.model.params());
  EXPECT_EQ(second.state.history.back().loss, full.state.history.back().loss);
}

TEST(TrainTest, NoEffectiveNoiseMatchesNoiseFreeBaseline) {
  InformativeData d = MakeInformative(7, 60);
  TrainConfig cfg = SmallConfig(5);
  cfg.epsilon_total = 1e12;
  ASSERT_OK_AND_ASSIGN(TrainResult noisy, TrainBudgets(d.train, d.sensitivity, cfg));
  TrainConfig clean = cfg;
  clean.perturb = false;
  ASSERT_OK_AND_ASSIGN(TrainResult base, TrainBudgets(d.train, d.sensitivity, clean));
  const double a = noisy.state.history.back().accuracy;
  const double b = base.state.history.back().accuracy;
  EXPECT_GT(b, 0.9);
  EXPECT_NEAR(a, b, 0.02);
}

TEST(TrainTest, LearnedBudgetsConcentrateOnInformativeCoordinates) {
  InformativeData d = MakeInformative(8, 100);
  TrainConfig cfg = SmallConfig(6);
  cfg.epochs = 24;
  cfg.warmup_epochs = 4;
  cfg.lr_theta = 0.3;
  cfg.epsilon_total = 0.5 * 189;
  ASSERT_OK_AND_ASSIGN(TrainResult r, TrainBudgets(d.train, d.sensitivity, cfg));
  ASSERT_FALSE(r.diverged);
  double z = 0.0;
  for (Eigen::Index p = 0; p < r.state.theta.size(); ++p) z += std::exp(r.state.theta(p));
  double informative_share = 0.0;
  for (size_t p : d.informative) informative_share += std::exp(r.state.theta(p)) / z;
  informative_share /= double(d.informative.size());
  EXPECT_GT(informative_share, 5.0 / 189);
}

TEST(TrainTest, WarmupTrainsCleanWithThetaFrozen) {
  InformativeData d = MakeInformative(10, 40);
  TrainConfig cfg = SmallConfig(8);
  cfg.epochs = 6;
  cfg.warmup_epochs = 2;
  cfg.max_epochs_per_call = 2;
  cfg.epsilon_total = 0.5 * 189;
  ASSERT_OK_AND_ASSIGN(TrainResult warm, TrainBudgets(d.train, d.sensitivity, cfg));
  EXPECT_TRUE(warm.state.theta.isZero());
  TrainConfig clean = cfg;
  clean.perturb = false;
  ASSERT_OK_AND_ASSIGN(TrainResult base, TrainBudgets(d.train, d.sensitivity, clean));
  EXPECT_EQ(warm.state.model.params(), base.state.model.params());
  ASSERT_OK_AND_ASSIGN(TrainResult next,
                       TrainBudgets(d.train, d.sensitivity, cfg, &warm.state));
  EXPECT_FALSE(next.state.theta.isZero());
}

TEST(TrainTest, AdaptiveNormalizationTracksNoisyInputs) {
  InformativeData d = MakeInformative(11, 40);
  TrainConfig cfg = SmallConfig(9);
  cfg.epochs = 12;
  cfg.learn_theta = false;
  cfg.epsilon_total = 0.5 * 189;  // Laplace scale 4 on a range of 2
  ASSERT_OK_AND_ASSIGN(TrainResult r, TrainBudgets(d.train, d.sensitivity, cfg));
  // The scale keeps the range convention, var = 1 / (12 inv^2). Noise adds
  // 2 * 4^2 to an input variance of at most 1.
  const Eigen::VectorXd& inv = r.state.model.input_inv_scale();
  const double var = (1.0 / (12.0 * inv.array().square())).mean();
  EXPECT_NEAR(var, 32.5, 0.1 * 32.5);
  EXPECT_LT(r.state.model.input_centre().cwiseAbs().maxCoeff(), 2.0);

  cfg.adaptive_normalization = false;
  ASSERT_OK_AND_ASSIGN(TrainResult fixed, TrainBudgets(d.train, d.sensitivity, cfg));
  EXPECT_NEAR(fixed.state.model.input_inv_scale().mean(), 0.5, 0.01);
}

TEST(TrainTest, DivergenceKeepsHistory) {
  InformativeData d = MakeInformative(9, 20);
  TrainConfig cfg = SmallConfig(7);
  cfg.epochs = 3;
  cfg.lr_model = 1e300;
  cfg.momentum = 0.0;
  cfg.perturb = false;
  ASSERT_OK_AND_ASSIGN(TrainResult r, TrainBudgets(d.train, d.sensitivity, cfg));
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(r.state.epochs_done, 3);
}

TEST(EvaluateTest, RandomModelIsAtChance) {
  InformativeData d = MakeInformative(10, 250);
  Rng rng(1);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create({189, 32, 16, 4}, rng));
  ASSERT_OK(model.SetInputNormalization(d.sensitivity));
  // Average over several random models: a single one may prefer one class.
  double acc = 0.0;
  const int models = 20;
  for (int m = 0; m < models; ++m) {
    Rng mr(100 + m);
    auto rm = *ToyRecognizer::Create({189, 32, 16, 4}, mr);
    ASSERT_OK(rm.SetInputNormalization(d.sensitivity));
    ASSERT_OK_AND_ASSIGN(EvalReport r, Evaluate(rm, d.train, d.sensitivity,
                                                Eigen::VectorXd::Zero(189), 1.0, rng, false));
    acc += r.accuracy;
  }
  acc /= models;
  const double n = double(d.train.size()) * models;
  const double sd = std::sqrt(0.25 * 0.75 / n);
  EXPECT_NEAR(acc, 0.25, 3 * sd + 0.02);
}

TEST(EvaluateTest, NoiseDoesNotHelpOnTrainingData) {
  InformativeData d = MakeInformative(11, 60);
  int noisy_wins = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg = SmallConfig(seed);
    cfg.perturb = false;
    ASSERT_OK_AND_ASSIGN(TrainResult r, TrainBudgets(d.train, d.sensitivity, cfg));
    Rng rng(seed, 9);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(189);
    ASSERT_OK_AND_ASSIGN(EvalReport clean,
                         Evaluate(r.state.model, d.train, d.sensitivity, theta, 20.0, rng, false));
    ASSERT_OK_AND_ASSIGN(EvalReport noisy,
                         Evaluate(r.state.model, d.train, d.sensitivity, theta, 20.0, rng, true));
    noisy_wins += noisy.accuracy > clean.accuracy;
  }
  EXPECT_EQ(noisy_wins, 0);
}

TEST(EvaluateTest, ReproducibleAndEmptyRejected) {
  InformativeData d = MakeInformative(12, 20);
  Rng init(1);
  ASSERT_OK_AND_ASSIGN(ToyRecognizer model, ToyRecognizer::Create({189, 8, 4, 4}, init));
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(189);
  Rng a(5), b(5);
  ASSERT_OK_AND_ASSIGN(EvalReport r1, Evaluate(model, d.test, d.sensitivity, theta, 2.0, a));
  ASSERT_OK_AND_ASSIGN(EvalReport r2, Evaluate(model, d.test, d.sensitivity, theta, 2.0, b));
  EXPECT_EQ(r1.accuracy, r2.accuracy);
  EXPECT_EQ(r1.verification_accuracy, r2.verification_accuracy);
  LabeledSet empty;
  EXPECT_FALSE(Evaluate(model, empty, d.sensitivity, theta, 2.0, a).ok());
}

TEST(VerificationTest, BestThreshold) {
  const std::vector<double> sim = {0.9, 0.8, 0.7, 0.2, 0.1};
  const std::vector<uint8_t> same = {1, 1, 0, 0, 0};
  const VerificationResult r = BestThresholdAccuracy(sim, same);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_GT(r.threshold, 0.7);
  EXPECT_LT(r.threshold, 0.8);
}

}  // namespace
}  // namespace freqdp
