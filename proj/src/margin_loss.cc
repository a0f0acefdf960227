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

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"

namespace freqdp {
namespace {

// Keeps acos and its derivative finite.
constexpr double kCosClamp = 1.0 - 1e-7;

}  // namespace

absl::StatusOr<MarginKind> ParseMarginKind(std::string_view name) {
  if (name == "arcface") return MarginKind::kArcFace;
  if (name == "cosface") return MarginKind::kCosFace;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown margin loss '", std::string(name), "' (arcface|cosface)"));
}

std::string_view MarginKindName(MarginKind kind) {
  return kind == MarginKind::kArcFace ? "arcface" : "cosface";
}

absl::StatusOr<MarginLossResult> MarginSoftmaxLoss(
    MarginKind kind, const Eigen::MatrixXd& embeddings, std::span<const int> labels,
    const Eigen::MatrixXd& weights, double scale, double margin) {
  const Eigen::Index batch = embeddings.rows();
  const Eigen::Index classes = weights.rows();
  if (batch == 0) return absl::InvalidArgumentError("empty batch");
  if (static_cast<size_t>(batch) != labels.size()) {
    return absl::InvalidArgumentError("labels do not match batch size");
  }
  if (embeddings.cols() != weights.cols()) {
    return absl::InvalidArgumentError("embedding and weight dimensions differ");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      return absl::InvalidArgumentError(absl::StrCat("label ", y, " out of range"));
    }
  }

  MarginLossResult r;
  r.cosines = embeddings * weights.transpose();
  Eigen::MatrixXd dcos(batch, classes);  // d loss / d cosine
  const double cos_m = std::cos(margin), sin_m = std::sin(margin);
  const double threshold = -cos_m;  // cos(pi - m)
  const double linear_offset = margin * sin_m;
  double total = 0.0;
  Eigen::VectorXd logits(classes);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int y = labels[b];
    double target_slope = scale;  // d logit_y / d cos_y
    for (Eigen::Index c = 0; c < classes; ++c) logits(c) = scale * r.cosines(b, c);
    const double cy = r.cosines(b, y);
    if (kind == MarginKind::kArcFace) {
      if (cy > threshold) {
        const double cc = std::min(cy, kCosClamp);
        const double sin_t = std::sqrt(1.0 - cc * cc);
        logits(y) = scale * (cc * cos_m - sin_t * sin_m);
        target_slope = cc == cy ? scale * (cos_m + cc * sin_m / sin_t) : 0.0;
      } else {
        // Past theta = pi - m, cos(theta + m) turns back up; use a linear
        // extension that stays monotone in the target cosine.
        logits(y) = scale * (cy - linear_offset);
      }
    } else {
      logits(y) = scale * (cy - margin);
    }
    const double mx = logits.maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) z += std::exp(logits(c) - mx);
    const double log_z = mx + std::log(z);
    total += log_z - logits(y);
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double p = std::exp(logits(c) - log_z);
      const double dlogit = (p - (c == y ? 1.0 : 0.0)) / double(batch);
      dcos(b, c) = dlogit * (c == y ? target_slope : scale);
    }
  }
  r.loss = total / double(batch);
  r.grad_embeddings = dcos * weights;
  r.grad_weights = dcos.transpose() * embeddings;
  return r;
}

}  // namespace freqdp
