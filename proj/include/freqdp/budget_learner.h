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

#ifndef FREQDP_BUDGET_LEARNER_H_
#define FREQDP_BUDGET_LEARNER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "freqdp/bdct.h"
#include "freqdp/dp_mechanism.h"
#include "freqdp/margin_loss.h"
#include "freqdp/recognizer.h"
#include "freqdp/rng.h"

namespace freqdp {

// Flattened samples (one row per sample) with integer class labels.
struct LabeledSet {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  int num_classes = 0;

  Eigen::Index size() const { return features.rows(); }
};

absl::StatusOr<LabeledSet> MakeLabeledSet(std::span<const FrequencyTensor> tensors,
                                          std::span<const int> labels);

// Laplace perturbation written as x + sigma(theta) * L with the unit draw L
// kept, so gradients reach theta:
//
//   sigma_p = range_p / (epsilon_total * softmax(theta)_p)
//   d sigma_p / d theta_q = -sigma_p (delta_pq - softmax_q)
//
// The softmax runs over positions with a non-zero calibrated range; other
// positions pass through unchanged.
class BudgetLayer {
 public:
  static absl::StatusOr<BudgetLayer> Create(const SensitivityMap& s,
                                            double epsilon_total);

  const Eigen::VectorXd& theta() const { return theta_; }
  absl::Status SetTheta(const Eigen::VectorXd& theta);
  double epsilon_total() const { return epsilon_total_; }
  const Eigen::VectorXd& scales() const { return scales_; }
  const Eigen::VectorXd& shares() const { return shares_; }  // softmax(theta)

  BudgetAllocation Allocation() const;

  // Unit Laplace draws, row-major over (sample, position).
  Eigen::MatrixXd DrawUnitNoise(Eigen::Index rows, Rng& rng) const;

  // clamp(x) + sigma * unit_noise.
  Eigen::MatrixXd Apply(const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& unit_noise) const;

  // d loss / d theta given d loss / d output and the draws used in Apply.
  Eigen::VectorXd ThetaGradient(const Eigen::MatrixXd& grad_output,
                                const Eigen::MatrixXd& unit_noise) const;

 private:
  absl::Status Refresh();

  Eigen::VectorXd lo_, hi_, range_;
  std::vector<uint8_t> support_;
  double epsilon_total_ = 0.0;
  Eigen::VectorXd theta_;
  Eigen::VectorXd shares_;
  Eigen::VectorXd scales_;
};

struct ReparamSample {
  FrequencyTensor perturbed;
  std::vector<double> unit_noise;
};

// Draws one unit Laplace value per position in storage order, so for the same
// generator state the output equals Perturb() with the same budgets.
absl::StatusOr<ReparamSample> ReparamPerturbForward(const FrequencyTensor& t,
                                                    const SensitivityMap& s,
                                                    std::span<const float> theta,
                                                    double epsilon_total, Rng& rng);

struct TrainConfig {
  double epsilon_total = 1.0;
  double lr_model = 0.1;
  double lr_theta = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;  // model weights only
  int epochs = 24;
  int batch_size = 512;
  MarginKind loss = MarginKind::kArcFace;
  double scale = 64.0;
  double margin = 0.4;
  int hidden_dim = 128;
  int embed_dim = 64;
  bool learn_theta = true;  // false keeps budgets uniform
  bool perturb = true;      // false trains on the inputs as given
  // Leading epochs that train the model on clean inputs with theta frozen.
  int warmup_epochs = 0;
  // Track running statistics of the training inputs, as seen after
  // perturbation, in the model's input normalisation.
  bool adaptive_normalization = true;
  uint64_t seed = 0;
  // When positive, return after this many epochs even if the schedule has
  // more; a later call with the returned state resumes where this one stopped.
  int max_epochs_per_call = 0;

  // ArcFace: s = 64, m = 0.4. CosFace: s = 64, m = 0.35.
  static TrainConfig ForLoss(MarginKind kind);
  absl::Status Validate() const;
};

// Learning-rate multiplier: divided by 10 at 10/24, 18/24 and 22/24 of the run.
double LearningRateFactor(int epoch, int total_epochs);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double lr_model = 0.0;
};

struct TrainState {
  ToyRecognizer model;
  Eigen::VectorXd theta;
  Eigen::VectorXd model_velocity;
  Eigen::VectorXd theta_velocity;
  int epochs_done = 0;
  std::vector<EpochStats> history;
};

struct TrainResult {
  TrainState state;
  bool diverged = false;
};

// Joint SGD over model weights and theta with fresh noise each forward pass.
// Epoch e shuffles and draws noise from Rng(seed, e), so a run resumed from
// `resume` continues exactly where the saved one stopped.
absl::StatusOr<TrainResult> TrainBudgets(const LabeledSet& data,
                                         const SensitivityMap& s,
                                         const TrainConfig& cfg,
                                         const TrainState* resume = nullptr);

struct EvalReport {
  int64_t samples = 0;
  double accuracy = 0.0;
  double verification_accuracy = 0.0;
  double verification_threshold = 0.0;
  int64_t pairs = 0;
};

// Classification accuracy and best-threshold pair verification on perturbed
// copies of `data` (clean when `perturb` is false).
absl::StatusOr<EvalReport> Evaluate(const ToyRecognizer& model, const LabeledSet& data,
                                    const SensitivityMap& s,
                                    const Eigen::VectorXd& theta,
                                    double epsilon_total, Rng& rng,
                                    bool perturb = true);

// Best accuracy over thresholds on cosine similarity; pairs with
// similarity > threshold are predicted "same".
struct VerificationResult {
  double accuracy = 0.0;
  double threshold = 0.0;
};
VerificationResult BestThresholdAccuracy(std::span<const double> similarity,
                                         std::span<const uint8_t> same);

}  // namespace freqdp

#endif  // FREQDP_BUDGET_LEARNER_H_
