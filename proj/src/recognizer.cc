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

#include "absl/strings/str_cat.h"

namespace freqdp {
namespace {

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using Map = Eigen::Map<Eigen::MatrixXd>;

struct Offsets {
  Eigen::Index w1, b1, w2, b2, cls;
};

Offsets ComputeOffsets(const RecognizerShape& s) {
  Offsets o;
  o.w1 = 0;
  o.b1 = o.w1 + Eigen::Index(s.hidden_dim) * s.input_dim;
  o.w2 = o.b1 + s.hidden_dim;
  o.b2 = o.w2 + Eigen::Index(s.embed_dim) * s.hidden_dim;
  o.cls = o.b2 + s.embed_dim;
  return o;
}

Eigen::MatrixXd RowNormalize(const Eigen::MatrixXd& m, Eigen::VectorXd* norms) {
  Eigen::VectorXd n = m.rowwise().norm();
  for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = std::max(n(i), 1e-12);
  if (norms != nullptr) *norms = n;
  return n.cwiseInverse().asDiagonal() * m;
}

// Gradient through u = v / |v| for each row.
Eigen::MatrixXd RowNormalizeBackward(const Eigen::MatrixXd& unit,
                                     const Eigen::VectorXd& norms,
                                     const Eigen::MatrixXd& grad_unit) {
  const Eigen::VectorXd dots = (unit.array() * grad_unit.array()).rowwise().sum();
  Eigen::MatrixXd g = grad_unit - dots.asDiagonal() * unit;
  return norms.cwiseInverse().asDiagonal() * g;
}

}  // namespace

absl::StatusOr<ToyRecognizer> ToyRecognizer::Create(const RecognizerShape& shape,
                                                    Rng& rng) {
  if (shape.input_dim <= 0 || shape.hidden_dim <= 0 || shape.embed_dim <= 0 ||
      shape.num_classes <= 0) {
    return absl::InvalidArgumentError("recognizer dimensions must be positive");
  }
  ToyRecognizer r;
  r.shape_ = shape;
  r.params_ = Eigen::VectorXd::Zero(shape.ParameterCount());
  r.centre_ = Eigen::VectorXd::Zero(shape.input_dim);
  r.inv_scale_ = Eigen::VectorXd::Ones(shape.input_dim);
  const Offsets o = ComputeOffsets(shape);
  const double s1 = 1.0 / std::sqrt(double(shape.input_dim));
  const double s2 = 1.0 / std::sqrt(double(shape.hidden_dim));
  for (Eigen::Index i = o.w1; i < o.b1; ++i) r.params_(i) = s1 * rng.Normal();
  for (Eigen::Index i = o.w2; i < o.b2; ++i) r.params_(i) = s2 * rng.Normal();
  for (Eigen::Index i = o.cls; i < r.params_.size(); ++i) r.params_(i) = rng.Normal();
  return r;
}

absl::Status ToyRecognizer::SetInputNormalization(const SensitivityMap& s) {
  if (s.size() != size_t(shape_.input_dim)) {
    return absl::InvalidArgumentError("sensitivity map does not match input dim");
  }
  Eigen::VectorXd centre(shape_.input_dim), inv(shape_.input_dim);
  for (size_t p = 0; p < s.size(); ++p) {
    const double range = s.Range(p);
    centre(p) = 0.5 * (double(s.r_min[p]) + double(s.r_max[p]));
    inv(p) = range > 0.0 ? 1.0 / range : 0.0;
  }
  return SetInputNormalization(std::move(centre), std::move(inv));
}

absl::Status ToyRecognizer::SetInputNormalization(Eigen::VectorXd centre,
                                                  Eigen::VectorXd inv_scale) {
  if (centre.size() != shape_.input_dim || inv_scale.size() != shape_.input_dim) {
    return absl::InvalidArgumentError("normalisation vectors do not match input dim");
  }
  centre_ = std::move(centre);
  inv_scale_ = std::move(inv_scale);
  return absl::OkStatus();
}

Eigen::MatrixXd ToyRecognizer::NormalizedClassWeights() const {
  const Offsets o = ComputeOffsets(shape_);
  ConstMap cls(params_.data() + o.cls, shape_.num_classes, shape_.embed_dim);
  return RowNormalize(cls, nullptr);
}

Eigen::MatrixXd ToyRecognizer::Embed(const Eigen::MatrixXd& x) const {
  const Offsets o = ComputeOffsets(shape_);
  ConstMap w1(params_.data() + o.w1, shape_.hidden_dim, shape_.input_dim);
  ConstMap w2(params_.data() + o.w2, shape_.embed_dim, shape_.hidden_dim);
  Eigen::Map<const Eigen::VectorXd> b1(params_.data() + o.b1, shape_.hidden_dim);
  Eigen::Map<const Eigen::VectorXd> b2(params_.data() + o.b2, shape_.embed_dim);
  const Eigen::MatrixXd z =
      (x.rowwise() - centre_.transpose()) * inv_scale_.asDiagonal();
  const Eigen::MatrixXd h =
      ((z * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
  const Eigen::MatrixXd v = (h * w2.transpose()).rowwise() + b2.transpose();
  return RowNormalize(v, nullptr);
}

absl::StatusOr<ToyRecognizer::LossAndGrad> ToyRecognizer::LossAndGradient(
    const Eigen::MatrixXd& x, std::span<const int> labels, MarginKind kind,
    double scale, double margin) const {
  if (x.cols() != shape_.input_dim) {
    return absl::InvalidArgumentError(
        absl::StrCat("input has ", x.cols(), " columns, expected ", shape_.input_dim));
  }
  const Offsets o = ComputeOffsets(shape_);
  ConstMap w1(params_.data() + o.w1, shape_.hidden_dim, shape_.input_dim);
  ConstMap w2(params_.data() + o.w2, shape_.embed_dim, shape_.hidden_dim);
  ConstMap cls(params_.data() + o.cls, shape_.num_classes, shape_.embed_dim);
  Eigen::Map<const Eigen::VectorXd> b1(params_.data() + o.b1, shape_.hidden_dim);
  Eigen::Map<const Eigen::VectorXd> b2(params_.data() + o.b2, shape_.embed_dim);

  const Eigen::MatrixXd z =
      (x.rowwise() - centre_.transpose()) * inv_scale_.asDiagonal();
  const Eigen::MatrixXd h =
      ((z * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
  const Eigen::MatrixXd v = (h * w2.transpose()).rowwise() + b2.transpose();
  Eigen::VectorXd v_norms, c_norms;
  const Eigen::MatrixXd e = RowNormalize(v, &v_norms);
  const Eigen::MatrixXd wn = RowNormalize(cls, &c_norms);

  auto margin_loss = MarginSoftmaxLoss(kind, e, labels, wn, scale, margin);
  if (!margin_loss.ok()) return margin_loss.status();

  LossAndGrad out;
  out.loss = margin_loss->loss;
  out.cosines = std::move(margin_loss->cosines);
  out.grad_params = Eigen::VectorXd::Zero(params_.size());
  Map g_w1(out.grad_params.data() + o.w1, shape_.hidden_dim, shape_.input_dim);
  Map g_w2(out.grad_params.data() + o.w2, shape_.embed_dim, shape_.hidden_dim);
  Map g_cls(out.grad_params.data() + o.cls, shape_.num_classes, shape_.embed_dim);
  Eigen::Map<Eigen::VectorXd> g_b1(out.grad_params.data() + o.b1, shape_.hidden_dim);
  Eigen::Map<Eigen::VectorXd> g_b2(out.grad_params.data() + o.b2, shape_.embed_dim);

  g_cls = RowNormalizeBackward(wn, c_norms, margin_loss->grad_weights);
  const Eigen::MatrixXd g_v =
      RowNormalizeBackward(e, v_norms, margin_loss->grad_embeddings);
  g_w2 = g_v.transpose() * h;
  g_b2 = g_v.colwise().sum().transpose();
  const Eigen::MatrixXd g_a =
      ((g_v * w2).array() * (1.0 - h.array().square())).matrix();
  g_w1 = g_a.transpose() * z;
  g_b1 = g_a.colwise().sum().transpose();
  out.grad_inputs = (g_a * w1) * inv_scale_.asDiagonal();
  return out;
}

std::vector<int> ToyRecognizer::Classify(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd cos = Embed(x) * NormalizedClassWeights().transpose();
  std::vector<int> out(cos.rows());
  for (Eigen::Index b = 0; b < cos.rows(); ++b) {
    Eigen::Index best;
    cos.row(b).maxCoeff(&best);
    out[b] = static_cast<int>(best);
  }
  return out;
}

}  // namespace freqdp
