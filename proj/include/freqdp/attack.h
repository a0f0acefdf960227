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

#ifndef FREQDP_ATTACK_H_
#define FREQDP_ATTACK_H_

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "freqdp/bdct.h"
#include "freqdp/image.h"
#include "freqdp/pipeline.h"
#include "freqdp/recognizer.h"
#include "json.hpp"

namespace freqdp {

// PSNR of identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(255^2 / MSE) over all channels; kPsnrIdentical when MSE is 0.
absl::StatusOr<double> Psnr(const RgbImage& a, const RgbImage& b);

struct NlmParams {
  int patch = 7;
  int window = 21;
  double h = 10.0;
  // Noise level inside the weights; estimated from the image when unset.
  std::optional<double> sigma;
};

// Robust noise estimate: 1.4826 * MAD of horizontal neighbour differences / sqrt(2).
double EstimateNoiseSigma(const RgbImage& img);

// Non-local means. Each pixel becomes the weighted mean of the pixels in its
// search window, weighted by exp(-max(d2 - 2 sigma^2, 0) / h^2) where d2 is
// the mean squared difference between the two patches over all channels.
// Patch and window sizes must be odd and no larger than the image.
absl::StatusOr<RgbImage> NlmDenoise(const RgbImage& img, const NlmParams& params);

struct WhiteboxOptions {
  bool denoise = false;
  NlmParams nlm;
};

// Inverts the public pipeline: insert the guessed DC (zeros when absent),
// inverse DCT, undo the upsampling, unshift, convert to RGB, clamp, and
// optionally denoise. NLM sizes are shrunk to fit small images.
absl::StatusOr<RgbImage> WhiteboxAttack(const FrequencyTensor& perturbed,
                                        const std::optional<DcPlanes>& dc_guess,
                                        const TransformConfig& cfg,
                                        const WhiteboxOptions& opts = {});

// Ridge-regression decoder from flattened DC-free tensors to flattened RGB.
// Stored in whichever of the primal (weights) or dual (training inputs and
// coefficients) forms is smaller; both represent the same affine map.
class LinearDecoder {
 public:
  struct Pair {
    const FrequencyTensor* input;
    const RgbImage* target;
  };

  static absl::StatusOr<LinearDecoder> Train(std::span<const Pair> pairs, double lambda);

  absl::StatusOr<RgbImage> Decode(const FrequencyTensor& t) const;

  double lambda() const { return lambda_; }
  Eigen::Index input_dim() const { return input_mean_.size(); }

 private:
  double lambda_ = 0.0;
  int hb_ = 0, wb_ = 0, channels_ = 0;
  int width_ = 0, height_ = 0;
  bool dual_ = false;
  Eigen::RowVectorXd input_mean_;
  Eigen::RowVectorXd output_mean_;
  Eigen::MatrixXd weights_;       // primal: D x out
  Eigen::MatrixXd train_inputs_;  // dual: n x D, centred
  Eigen::MatrixXd coefficients_;  // dual: n x out
};

// Cosine between the clean embeddings of two images (DC removed).
// Cosine of two embeddings, clamped to [-1, 1]; 0 if either is zero.
double CosineSimilarity(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);

absl::StatusOr<double> FeatureSimilarity(const ToyRecognizer& model, const RgbImage& a,
                                         const RgbImage& b, const TransformConfig& cfg);

struct AttackRecord {
  int64_t index = 0;
  std::string label;
  double psnr = 0.0;
  std::optional<double> similarity;
};

struct Aggregate {
  double mean = 0.0, min = 0.0, max = 0.0;
  int64_t finite = 0;  // PSNR aggregates skip the identical-image sentinel
};

struct AttackReport {
  std::string kind;          // "whitebox" or "blackbox"
  nlohmann::json parameters;  // attack and pipeline settings
  uint64_t seed = 0;
  std::vector<AttackRecord> records;

  Aggregate PsnrStats() const;
  std::optional<Aggregate> SimilarityStats() const;
  nlohmann::ordered_json ToJson() const;
  std::string ToCsv() const;
};

}  // namespace freqdp

#endif  // FREQDP_ATTACK_H_
