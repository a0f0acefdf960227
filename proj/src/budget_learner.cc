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
#include <limits>
#include <numbers>
#include <numeric>

#include "absl/strings/str_cat.h"

namespace freqdp {
namespace {

constexpr uint64_t kInitStream = 0x696e6974;  // "init"
constexpr double kStatsMomentum = 0.9;

// Moves the model's input centre and scale towards the batch mean and
// standard deviation. The scale keeps the range convention: a uniform input
// over [lo, hi] has inverse scale 1 / (hi - lo).
void UpdateInputStatistics(const Eigen::MatrixXd& x, ToyRecognizer& model) {
  const Eigen::VectorXd mean = x.colwise().mean().transpose();
  const Eigen::VectorXd var =
      (x.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  Eigen::VectorXd centre = model.input_centre();
  Eigen::VectorXd inv = model.input_inv_scale();
  for (Eigen::Index p = 0; p < x.cols(); ++p) {
    if (inv(p) == 0.0) continue;  // zero-range position
    const double old_var = 1.0 / (12.0 * inv(p) * inv(p));
    const double new_var = kStatsMomentum * old_var + (1.0 - kStatsMomentum) * var(p);
    centre(p) = kStatsMomentum * centre(p) + (1.0 - kStatsMomentum) * mean(p);
    if (new_var > 0.0) inv(p) = 1.0 / std::sqrt(12.0 * new_var);
  }
  model.SetInputNormalization(std::move(centre), std::move(inv)).IgnoreError();
}

std::vector<Eigen::Index> ShuffledIndices(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.UniformInt(uint64_t(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

absl::Status ValidateData(const LabeledSet& data) {
  if (data.size() == 0) return absl::InvalidArgumentError("empty training set");
  if (size_t(data.size()) != data.labels.size()) {
    return absl::InvalidArgumentError("labels do not match samples");
  }
  if (data.num_classes < 2) return absl::InvalidArgumentError("need at least 2 classes");
  std::vector<int> counts(data.num_classes, 0);
  for (int y : data.labels) {
    if (y < 0 || y >= data.num_classes) {
      return absl::InvalidArgumentError(absl::StrCat("label ", y, " out of range"));
    }
    ++counts[y];
  }
  for (int c = 0; c < data.num_classes; ++c) {
    if (counts[c] < 2) {
      return absl::InvalidArgumentError(
          absl::StrCat("class ", c, " has fewer than 2 samples"));
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<LabeledSet> MakeLabeledSet(std::span<const FrequencyTensor> tensors,
                                          std::span<const int> labels) {
  if (tensors.empty()) return absl::InvalidArgumentError("no tensors");
  if (tensors.size() != labels.size()) {
    return absl::InvalidArgumentError("tensor and label counts differ");
  }
  LabeledSet set;
  const size_t dim = tensors.front().values.size();
  set.features.resize(static_cast<Eigen::Index>(tensors.size()),
                      static_cast<Eigen::Index>(dim));
  for (size_t i = 0; i < tensors.size(); ++i) {
    if (!tensors[i].SameShape(tensors.front())) {
      return absl::InvalidArgumentError("tensors have inconsistent shapes");
    }
    for (size_t p = 0; p < dim; ++p) set.features(i, p) = tensors[i].values[p];
  }
  set.labels.assign(labels.begin(), labels.end());
  set.num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  return set;
}

absl::StatusOr<BudgetLayer> BudgetLayer::Create(const SensitivityMap& s,
                                                double epsilon_total) {
  if (!(epsilon_total > 0.0) || !std::isfinite(epsilon_total)) {
    return absl::InvalidArgumentError("epsilon_total must be positive and finite");
  }
  BudgetLayer layer;
  const auto n = static_cast<Eigen::Index>(s.size());
  layer.lo_.resize(n);
  layer.hi_.resize(n);
  layer.range_.resize(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    layer.lo_(p) = s.r_min[p];
    layer.hi_(p) = s.r_max[p];
    layer.range_(p) = s.Range(p);
  }
  layer.support_ = s.SupportMask();
  if (s.SupportSize() == 0) {
    return absl::FailedPreconditionError(
        "every calibrated range is zero; there is nothing to allocate budget to");
  }
  layer.epsilon_total_ = epsilon_total;
  layer.theta_ = Eigen::VectorXd::Zero(n);
  if (auto st = layer.Refresh(); !st.ok()) return st;
  return layer;
}

absl::Status BudgetLayer::SetTheta(const Eigen::VectorXd& theta) {
  if (theta.size() != theta_.size()) {
    return absl::InvalidArgumentError("theta size does not match the layer");
  }
  theta_ = theta;
  return Refresh();
}

absl::Status BudgetLayer::Refresh() {
  const Eigen::Index n = theta_.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index p = 0; p < n; ++p) {
    if (!std::isfinite(theta_(p))) return absl::InvalidArgumentError("theta is not finite");
    if (support_[p]) mx = std::max(mx, theta_(p));
  }
  shares_ = Eigen::VectorXd::Zero(n);
  double z = 0.0;
  for (Eigen::Index p = 0; p < n; ++p) {
    if (!support_[p]) continue;
    shares_(p) = std::exp(theta_(p) - mx);
    z += shares_(p);
  }
  shares_ /= z;
  scales_ = Eigen::VectorXd::Zero(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    if (!support_[p]) continue;
    scales_(p) = range_(p) / (epsilon_total_ * shares_(p));
    if (!std::isfinite(scales_(p))) {
      return absl::OutOfRangeError(
          absl::StrCat("budget at position ", p, " underflowed"));
    }
  }
  return absl::OkStatus();
}

BudgetAllocation BudgetLayer::Allocation() const {
  BudgetAllocation b;
  b.theta.resize(theta_.size());
  for (Eigen::Index p = 0; p < theta_.size(); ++p) b.theta[p] = float(theta_(p));
  b.epsilon_total = epsilon_total_;
  b.support = support_;
  b.budgets.resize(theta_.size());
  for (Eigen::Index p = 0; p < theta_.size(); ++p) {
    b.budgets[p] = epsilon_total_ * shares_(p);
  }
  return b;
}

Eigen::MatrixXd BudgetLayer::DrawUnitNoise(Eigen::Index rows, Rng& rng) const {
  Eigen::MatrixXd l(rows, theta_.size());
  for (Eigen::Index b = 0; b < rows; ++b) {
    for (Eigen::Index p = 0; p < theta_.size(); ++p) l(b, p) = SampleLaplace(1.0, rng);
  }
  return l;
}

Eigen::MatrixXd BudgetLayer::Apply(const Eigen::MatrixXd& x,
                                   const Eigen::MatrixXd& unit_noise) const {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index p = 0; p < x.cols(); ++p) {
    for (Eigen::Index b = 0; b < x.rows(); ++b) {
      out(b, p) = std::clamp(x(b, p), lo_(p), hi_(p)) + scales_(p) * unit_noise(b, p);
    }
  }
  return out;
}

Eigen::VectorXd BudgetLayer::ThetaGradient(const Eigen::MatrixXd& grad_output,
                                           const Eigen::MatrixXd& unit_noise) const {
  const Eigen::VectorXd a =
      (grad_output.array() * unit_noise.array()).colwise().sum().transpose() *
      scales_.array();
  const double total = a.sum();
  Eigen::VectorXd g = -a + shares_ * total;
  for (Eigen::Index p = 0; p < g.size(); ++p) {
    if (!support_[p]) g(p) = 0.0;
  }
  return g;
}

absl::StatusOr<ReparamSample> ReparamPerturbForward(const FrequencyTensor& t,
                                                    const SensitivityMap& s,
                                                    std::span<const float> theta,
                                                    double epsilon_total, Rng& rng) {
  if (t.dc_present) return absl::FailedPreconditionError("remove DC before perturbing");
  if (!s.Matches(t) || theta.size() != t.values.size()) {
    return absl::InvalidArgumentError("tensor, theta and sensitivity shapes differ");
  }
  auto layer = BudgetLayer::Create(s, epsilon_total);
  if (!layer.ok()) return layer.status();
  Eigen::VectorXd th(theta.size());
  for (size_t p = 0; p < theta.size(); ++p) th(p) = theta[p];
  if (auto st = layer->SetTheta(th); !st.ok()) return st;

  ReparamSample out;
  out.perturbed = t;
  out.unit_noise.resize(t.values.size());
  const auto& scales = layer->scales();
  for (size_t p = 0; p < t.values.size(); ++p) {
    const double unit = SampleLaplace(1.0, rng);
    out.unit_noise[p] = unit;
    const float x = std::clamp(t.values[p], s.r_min[p], s.r_max[p]);
    out.perturbed.values[p] = static_cast<float>(x + scales(p) * unit);
  }
  return out;
}

TrainConfig TrainConfig::ForLoss(MarginKind kind) {
  TrainConfig cfg;
  cfg.loss = kind;
  cfg.scale = 64.0;
  cfg.margin = kind == MarginKind::kArcFace ? 0.4 : 0.35;
  return cfg;
}

absl::Status TrainConfig::Validate() const {
  if (!(epsilon_total > 0.0)) return absl::InvalidArgumentError("epsilon must be positive");
  if (!(lr_model > 0.0) || !(lr_theta > 0.0)) {
    return absl::InvalidArgumentError("learning rates must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    return absl::InvalidArgumentError("momentum must be in [0, 1)");
  }
  if (weight_decay < 0.0) return absl::InvalidArgumentError("weight decay must be >= 0");
  if (max_epochs_per_call < 0) {
    return absl::InvalidArgumentError("max_epochs_per_call must be >= 0");
  }
  if (epochs <= 0 || batch_size <= 0) {
    return absl::InvalidArgumentError("epochs and batch size must be positive");
  }
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    return absl::InvalidArgumentError("warmup epochs must be in [0, epochs)");
  }
  if (!(scale > 0.0) || margin < 0.0) {
    return absl::InvalidArgumentError("scale must be positive and margin non-negative");
  }
  if (loss == MarginKind::kArcFace && margin >= std::numbers::pi / 2) {
    return absl::InvalidArgumentError("arcface margin must be below pi/2");
  }
  if (hidden_dim <= 0 || embed_dim <= 0) {
    return absl::InvalidArgumentError("layer sizes must be positive");
  }
  return absl::OkStatus();
}

double LearningRateFactor(int epoch, int total_epochs) {
  double factor = 1.0;
  for (double frac : {10.0 / 24.0, 18.0 / 24.0, 22.0 / 24.0}) {
    const int milestone = static_cast<int>(std::lround(frac * total_epochs));
    if (epoch >= milestone) factor *= 0.1;
  }
  return factor;
}

absl::StatusOr<TrainResult> TrainBudgets(const LabeledSet& data,
                                         const SensitivityMap& s,
                                         const TrainConfig& cfg,
                                         const TrainState* resume) {
  if (auto st = cfg.Validate(); !st.ok()) return st;
  if (auto st = ValidateData(data); !st.ok()) return st;
  if (size_t(data.features.cols()) != s.size()) {
    return absl::InvalidArgumentError("feature width does not match sensitivity map");
  }
  auto layer = BudgetLayer::Create(s, cfg.epsilon_total);
  if (!layer.ok()) return layer.status();

  TrainResult result;
  TrainState& st = result.state;
  if (resume != nullptr) {
    st = *resume;
    const auto& shape = st.model.shape();
    if (shape.input_dim != data.features.cols() || shape.num_classes != data.num_classes ||
        st.theta.size() != data.features.cols()) {
      return absl::InvalidArgumentError("checkpoint does not match the training data");
    }
  } else {
    Rng init(cfg.seed, kInitStream);
    auto model = ToyRecognizer::Create(
        RecognizerShape{static_cast<int>(data.features.cols()), cfg.hidden_dim,
                        cfg.embed_dim, data.num_classes},
        init);
    if (!model.ok()) return model.status();
    st.model = *std::move(model);
    if (auto status = st.model.SetInputNormalization(s); !status.ok()) return status;
    st.theta = Eigen::VectorXd::Zero(data.features.cols());
    st.model_velocity = Eigen::VectorXd::Zero(st.model.params().size());
    st.theta_velocity = Eigen::VectorXd::Zero(st.theta.size());
  }
  if (auto status = layer->SetTheta(st.theta); !status.ok()) return status;

  const bool update_theta = cfg.learn_theta && cfg.perturb;
  const Eigen::Index n = data.size();
  const int last_epoch = cfg.max_epochs_per_call > 0
                             ? std::min(cfg.epochs, st.epochs_done + cfg.max_epochs_per_call)
                             : cfg.epochs;
  for (int epoch = st.epochs_done; epoch < last_epoch; ++epoch) {
    const double factor = LearningRateFactor(epoch, cfg.epochs);
    const double lr_model = cfg.lr_model * factor;
    const double lr_theta = cfg.lr_theta * factor;
    Rng rng(cfg.seed, uint64_t(epoch) + 1);
    const auto order = ShuffledIndices(n, rng);
    const bool perturb = cfg.perturb && epoch >= cfg.warmup_epochs;

    double loss_sum = 0.0;
    int64_t correct = 0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd x(bsz, data.features.cols());
      std::vector<int> labels(bsz);
      for (Eigen::Index b = 0; b < bsz; ++b) {
        x.row(b) = data.features.row(order[start + b]);
        labels[b] = data.labels[order[start + b]];
      }
      Eigen::MatrixXd noise;
      if (perturb) {
        noise = layer->DrawUnitNoise(bsz, rng);
        x = layer->Apply(x, noise);
      }
      if (cfg.adaptive_normalization) UpdateInputStatistics(x, st.model);
      auto lg = st.model.LossAndGradient(x, labels, cfg.loss, cfg.scale, cfg.margin);
      if (!lg.ok()) return lg.status();
      if (!std::isfinite(lg->loss)) {
        result.diverged = true;
        break;
      }
      loss_sum += lg->loss * double(bsz);
      for (Eigen::Index b = 0; b < bsz; ++b) {
        Eigen::Index best;
        lg->cosines.row(b).maxCoeff(&best);
        correct += best == labels[b];
      }

      Eigen::VectorXd& params = st.model.params();
      st.model_velocity =
          cfg.momentum * st.model_velocity + lg->grad_params + cfg.weight_decay * params;
      params -= lr_model * st.model_velocity;

      if (update_theta && perturb) {
        const Eigen::VectorXd g = layer->ThetaGradient(lg->grad_inputs, noise);
        st.theta_velocity = cfg.momentum * st.theta_velocity + g;
        st.theta -= lr_theta * st.theta_velocity;
        if (auto status = layer->SetTheta(st.theta); !status.ok()) {
          result.diverged = true;
          break;
        }
      }
    }
    if (result.diverged) break;
    st.history.push_back(EpochStats{epoch, loss_sum / double(n),
                                    double(correct) / double(n), lr_model});
    st.epochs_done = epoch + 1;
  }
  return result;
}

VerificationResult BestThresholdAccuracy(std::span<const double> similarity,
                                         std::span<const uint8_t> same) {
  VerificationResult best;
  const size_t n = similarity.size();
  if (n == 0) return best;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return similarity[a] > similarity[b]; });
  int64_t correct = 0;
  for (size_t i = 0; i < n; ++i) correct += same[i] ? 0 : 1;
  best.accuracy = double(correct) / double(n);
  best.threshold = similarity[order[0]] + 1e-9;
  for (size_t i = 0; i < n; ++i) {
    correct += same[order[i]] ? 1 : -1;
    const bool boundary =
        i + 1 == n || similarity[order[i + 1]] < similarity[order[i]];
    if (!boundary) continue;
    const double acc = double(correct) / double(n);
    if (acc > best.accuracy) {
      best.accuracy = acc;
      best.threshold = i + 1 == n ? similarity[order[i]] - 1e-9
                                  : 0.5 * (similarity[order[i]] + similarity[order[i + 1]]);
    }
  }
  return best;
}

absl::StatusOr<EvalReport> Evaluate(const ToyRecognizer& model, const LabeledSet& data,
                                    const SensitivityMap& s,
                                    const Eigen::VectorXd& theta, double epsilon_total,
                                    Rng& rng, bool perturb) {
  if (data.size() == 0) return absl::InvalidArgumentError("empty evaluation set");
  if (model.shape().input_dim != data.features.cols()) {
    return absl::InvalidArgumentError("model input does not match evaluation data");
  }
  Eigen::MatrixXd x = data.features;
  if (perturb) {
    auto layer = BudgetLayer::Create(s, epsilon_total);
    if (!layer.ok()) return layer.status();
    if (auto st = layer->SetTheta(theta); !st.ok()) return st;
    x = layer->Apply(x, layer->DrawUnitNoise(x.rows(), rng));
  }
  const Eigen::MatrixXd emb = model.Embed(x);
  const Eigen::MatrixXd cos = emb * model.NormalizedClassWeights().transpose();
  EvalReport report;
  report.samples = data.size();
  int64_t correct = 0;
  for (Eigen::Index b = 0; b < cos.rows(); ++b) {
    Eigen::Index best;
    cos.row(b).maxCoeff(&best);
    correct += best == data.labels[b];
  }
  report.accuracy = double(correct) / double(data.size());

  std::vector<double> sims;
  std::vector<uint8_t> same;
  const Eigen::MatrixXd gram = emb * emb.transpose();
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < emb.rows(); ++j) {
      sims.push_back(gram(i, j));
      same.push_back(data.labels[i] == data.labels[j] ? 1 : 0);
    }
  }
  report.pairs = static_cast<int64_t>(sims.size());
  const auto v = BestThresholdAccuracy(sims, same);
  report.verification_accuracy = v.accuracy;
  report.verification_threshold = v.threshold;
  return report;
}

}  // namespace freqdp
