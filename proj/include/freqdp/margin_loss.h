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

#ifndef FREQDP_MARGIN_LOSS_H_
#define FREQDP_MARGIN_LOSS_H_

#include <span>
#include <string_view>

#include "Eigen/Dense"
#include "absl/status/statusor.h"

namespace freqdp {

enum class MarginKind {
  kArcFace,  // target logit s * cos(theta_y + m)
  kCosFace,  // target logit s * (cos theta_y - m)
};

absl::StatusOr<MarginKind> ParseMarginKind(std::string_view name);
std::string_view MarginKindName(MarginKind kind);

struct MarginLossResult {
  double loss = 0.0;                // mean cross-entropy over the batch
  Eigen::MatrixXd grad_embeddings;  // d loss / d embeddings, B x d
  Eigen::MatrixXd grad_weights;     // d loss / d weights, C x d
  Eigen::MatrixXd cosines;          // B x C
};

// Margin softmax cross-entropy on unit embeddings (rows, B x d) and unit class
// weights (rows, C x d). Gradients are taken with respect to the given unit
// vectors; callers chain them through their own normalisation.
absl::StatusOr<MarginLossResult> MarginSoftmaxLoss(
    MarginKind kind, const Eigen::MatrixXd& embeddings, std::span<const int> labels,
    const Eigen::MatrixXd& weights, double scale, double margin);

inline absl::StatusOr<MarginLossResult> ArcFaceLoss(
    const Eigen::MatrixXd& embeddings, std::span<const int> labels,
    const Eigen::MatrixXd& weights, double scale, double margin) {
  return MarginSoftmaxLoss(MarginKind::kArcFace, embeddings, labels, weights, scale,
                           margin);
}

inline absl::StatusOr<MarginLossResult> CosFaceLoss(
    const Eigen::MatrixXd& embeddings, std::span<const int> labels,
    const Eigen::MatrixXd& weights, double scale, double margin) {
  return MarginSoftmaxLoss(MarginKind::kCosFace, embeddings, labels, weights, scale,
                           margin);
}

}  // namespace freqdp

#endif  // FREQDP_MARGIN_LOSS_H_
