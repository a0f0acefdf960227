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

#ifndef FREQDP_RECOGNIZER_H_
#define FREQDP_RECOGNIZER_H_

#include <span>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "freqdp/dp_mechanism.h"
#include "freqdp/margin_loss.h"
#include "freqdp/rng.h"

namespace freqdp {

struct RecognizerShape {
  int input_dim = 0;
  int hidden_dim = 128;
  int embed_dim = 64;
  int num_classes = 0;

  // Learnable parameter count (the input normalisation is fixed).
  Eigen::Index ParameterCount() const {
    return Eigen::Index(hidden_dim) * input_dim + hidden_dim +
           Eigen::Index(embed_dim) * hidden_dim + embed_dim +
           Eigen::Index(num_classes) * embed_dim;
  }
};

// Small embedder standing in for a face-recognition backbone:
//
//   z = (x - centre) * inv_scale      fixed, from the sensitivity map
//   h = tanh(W1 z + b1)
//   e = normalize(W2 h + b2)
//
// plus a class-weight matrix whose rows are normalised before the margin
// loss. All learnable parameters live in one flat vector:
// [W1 (col-major) | b1 | W2 (col-major) | b2 | class weights (col-major)].
class ToyRecognizer {
 public:
  ToyRecognizer() = default;

  static absl::StatusOr<ToyRecognizer> Create(const RecognizerShape& shape,
                                              Rng& rng);

  // Centre each input at the middle of its calibrated range and scale the
  // range to unit width. Zero-range positions are ignored.
  absl::Status SetInputNormalization(const SensitivityMap& s);
  absl::Status SetInputNormalization(Eigen::VectorXd centre, Eigen::VectorXd inv_scale);

  const RecognizerShape& shape() const { return shape_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  const Eigen::VectorXd& input_centre() const { return centre_; }
  const Eigen::VectorXd& input_inv_scale() const { return inv_scale_; }

  // Unit-norm embeddings, one row per input row.
  Eigen::MatrixXd Embed(const Eigen::MatrixXd& x) const;

  // Class weights with unit rows.
  Eigen::MatrixXd NormalizedClassWeights() const;

  struct LossAndGrad {
    double loss = 0.0;
    Eigen::VectorXd grad_params;
    Eigen::MatrixXd grad_inputs;  // d loss / d x, same shape as x
    Eigen::MatrixXd cosines;      // B x C, without margin
  };

  absl::StatusOr<LossAndGrad> LossAndGradient(const Eigen::MatrixXd& x,
                                              std::span<const int> labels,
                                              MarginKind kind, double scale,
                                              double margin) const;

  // Argmax of cosine to the class weights.
  std::vector<int> Classify(const Eigen::MatrixXd& x) const;

 private:
  RecognizerShape shape_;
  Eigen::VectorXd params_;
  Eigen::VectorXd centre_;
  Eigen::VectorXd inv_scale_;
};

}  // namespace freqdp

#endif  // FREQDP_RECOGNIZER_H_
