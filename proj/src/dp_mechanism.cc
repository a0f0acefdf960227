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

#include "freqdp/dp_mechanism.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"

namespace freqdp {
namespace {

constexpr double kBoundSlack = 1e-9;

absl::Status CheckShape(const SensitivityMap& s, const FrequencyTensor& t) {
  if (!s.Matches(t) || t.values.size() != s.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "tensor shape [", t.hb, ",", t.wb, ",", t.channels,
        "] does not match sensitivity map [", s.hb, ",", s.wb, ",", s.channels, "]"));
  }
  return absl::OkStatus();
}

}  // namespace

std::vector<uint8_t> SensitivityMap::SupportMask() const {
  std::vector<uint8_t> mask(size());
  for (size_t p = 0; p < size(); ++p) mask[p] = r_max[p] > r_min[p] ? 1 : 0;
  return mask;
}

size_t SensitivityMap::SupportSize() const {
  size_t n = 0;
  for (size_t p = 0; p < size(); ++p) n += r_max[p] > r_min[p];
  return n;
}

absl::Status SensitivityCalibrator::Add(const FrequencyTensor& t) {
  if (t.dc_present) {
    return absl::FailedPreconditionError("calibrate on DC-removed tensors");
  }
  if (t.values.size() != size_t(t.hb) * t.wb * t.channels) {
    return absl::InvalidArgumentError("tensor buffer size does not match shape");
  }
  if (count_ == 0) {
    acc_.hb = t.hb;
    acc_.wb = t.wb;
    acc_.channels = t.channels;
    acc_.r_min = t.values;
    acc_.r_max = t.values;
    count_ = 1;
    return absl::OkStatus();
  }
  if (auto s = CheckShape(acc_, t); !s.ok()) return s;
  for (size_t p = 0; p < t.values.size(); ++p) {
    acc_.r_min[p] = std::min(acc_.r_min[p], t.values[p]);
    acc_.r_max[p] = std::max(acc_.r_max[p], t.values[p]);
  }
  ++count_;
  return absl::OkStatus();
}

absl::Status SensitivityCalibrator::Merge(const SensitivityCalibrator& other) {
  if (other.count_ == 0) return absl::OkStatus();
  if (count_ == 0) {
    *this = other;
    return absl::OkStatus();
  }
  if (other.acc_.hb != acc_.hb || other.acc_.wb != acc_.wb ||
      other.acc_.channels != acc_.channels) {
    return absl::InvalidArgumentError("cannot merge calibrators of different shapes");
  }
  for (size_t p = 0; p < acc_.size(); ++p) {
    acc_.r_min[p] = std::min(acc_.r_min[p], other.acc_.r_min[p]);
    acc_.r_max[p] = std::max(acc_.r_max[p], other.acc_.r_max[p]);
  }
  count_ += other.count_;
  return absl::OkStatus();
}

absl::StatusOr<SensitivityMap> SensitivityCalibrator::Finish(
    std::string dataset_id) const {
  if (count_ == 0) return absl::InvalidArgumentError("empty calibration stream");
  SensitivityMap out = acc_;
  out.dataset_id = std::move(dataset_id);
  out.image_count = count_;
  return out;
}

absl::StatusOr<SensitivityMap> CalibrateSensitivity(
    std::span<const FrequencyTensor> tensors, std::string dataset_id) {
  SensitivityCalibrator cal;
  for (const auto& t : tensors) {
    if (auto s = cal.Add(t); !s.ok()) return s;
  }
  return cal.Finish(std::move(dataset_id));
}

absl::StatusOr<double> ElementDistance(double x1, double x2, double r_min,
                                       double r_max, int64_t* clamped) {
  if (!(r_max > r_min)) {
    return absl::InvalidArgumentError("element distance undefined on a zero range");
  }
  auto clamp = [&](double x) {
    if (x < r_min || x > r_max) {
      if (clamped != nullptr) ++*clamped;
      return std::clamp(x, r_min, r_max);
    }
    return x;
  };
  return std::abs(clamp(x1) - clamp(x2)) / (r_max - r_min);
}

absl::StatusOr<double> TensorDistance(const FrequencyTensor& t1,
                                      const FrequencyTensor& t2,
                                      const SensitivityMap& s, int64_t* clamped) {
  if (auto st = CheckShape(s, t1); !st.ok()) return st;
  if (auto st = CheckShape(s, t2); !st.ok()) return st;
  double d = 0.0;
  for (size_t p = 0; p < s.size(); ++p) {
    if (!(s.r_max[p] > s.r_min[p])) continue;
    auto e = ElementDistance(t1.values[p], t2.values[p], s.r_min[p], s.r_max[p],
                             clamped);
    if (!e.ok()) return e.status();
    d = std::max(d, *e);
  }
  return d;
}

absl::StatusOr<BudgetAllocation> AllocateBudgets(std::span<const float> theta,
                                                 double epsilon_total,
                                                 std::span<const uint8_t> support) {
  if (!(epsilon_total > 0.0) || !std::isfinite(epsilon_total)) {
    return absl::InvalidArgumentError("epsilon_total must be positive and finite");
  }
  if (!support.empty() && support.size() != theta.size()) {
    return absl::InvalidArgumentError("support mask size does not match theta");
  }
  auto in_support = [&](size_t p) { return support.empty() || support[p] != 0; };
  double max_theta = -std::numeric_limits<double>::infinity();
  for (size_t p = 0; p < theta.size(); ++p) {
    if (!std::isfinite(theta[p])) {
      return absl::InvalidArgumentError(absl::StrCat("theta[", p, "] is not finite"));
    }
    if (in_support(p)) max_theta = std::max(max_theta, double(theta[p]));
  }
  if (!std::isfinite(max_theta)) {
    return absl::FailedPreconditionError(
        "softmax support is empty (every calibrated range is zero)");
  }
  BudgetAllocation b;
  b.theta.assign(theta.begin(), theta.end());
  b.epsilon_total = epsilon_total;
  b.support = support.empty() ? std::vector<uint8_t>(theta.size(), 1)
                              : std::vector<uint8_t>(support.begin(), support.end());
  b.budgets.assign(theta.size(), 0.0);
  double z = 0.0;
  for (size_t p = 0; p < theta.size(); ++p) {
    if (!b.support[p]) continue;
    b.budgets[p] = std::exp(double(theta[p]) - max_theta);
    z += b.budgets[p];
  }
  const double scale = epsilon_total / z;
  for (double& e : b.budgets) e *= scale;
  return b;
}

absl::StatusOr<BudgetAllocation> AllocateBudgets(const SensitivityMap& s,
                                                 std::span<const float> theta,
                                                 double epsilon_total) {
  if (theta.size() != s.size()) {
    return absl::InvalidArgumentError("theta size does not match sensitivity map");
  }
  const auto mask = s.SupportMask();
  return AllocateBudgets(theta, epsilon_total, mask);
}

double TotalBudgetFromMean(double epsilon_mean, const SensitivityMap& s) {
  return epsilon_mean * static_cast<double>(s.SupportSize());
}

absl::StatusOr<std::vector<double>> ComputeNoiseScales(const SensitivityMap& s,
                                                       const BudgetAllocation& b) {
  if (b.budgets.size() != s.size()) {
    return absl::InvalidArgumentError("budget allocation does not match sensitivity map");
  }
  std::vector<double> scales(s.size(), 0.0);
  for (size_t p = 0; p < s.size(); ++p) {
    const double range = s.Range(p);
    if (range <= 0.0) continue;
    if (!b.support[p]) {
      return absl::FailedPreconditionError(absl::StrCat(
          "position ", p, " has a non-zero range but lies outside the budget support"));
    }
    scales[p] = range / b.budgets[p];
    if (!std::isfinite(scales[p])) {
      return absl::OutOfRangeError(absl::StrCat(
          "budget at position ", p, " underflowed; noise scale is not finite"));
    }
  }
  return scales;
}

double SampleLaplace(double scale, Rng& rng) {
  if (scale == 0.0) return 0.0;
  double u;
  do {
    u = rng.Uniform01() - 0.5;
  } while (u == -0.5);
  const double sign = u < 0 ? -1.0 : (u > 0 ? 1.0 : 0.0);
  return -scale * sign * std::log(1.0 - 2.0 * std::abs(u));
}

absl::StatusOr<LaplacePerturber> LaplacePerturber::Create(
    const SensitivityMap& s, const BudgetAllocation& b) {
  auto scales = ComputeNoiseScales(s, b);
  if (!scales.ok()) return scales.status();
  return LaplacePerturber(s, *std::move(scales));
}

absl::StatusOr<FrequencyTensor> LaplacePerturber::Apply(const FrequencyTensor& t,
                                                        Rng& rng,
                                                        PerturbStats* stats) const {
  if (t.dc_present) return absl::FailedPreconditionError("remove DC before perturbing");
  if (auto s = CheckShape(sensitivity_, t); !s.ok()) return s;
  FrequencyTensor out = t;
  for (size_t p = 0; p < out.values.size(); ++p) {
    float x = out.values[p];
    if (x < sensitivity_.r_min[p] || x > sensitivity_.r_max[p]) {
      x = std::clamp(x, sensitivity_.r_min[p], sensitivity_.r_max[p]);
      if (stats != nullptr) ++stats->clamped;
    }
    const double unit = SampleLaplace(1.0, rng);
    out.values[p] = static_cast<float>(x + scales_[p] * unit);
  }
  return out;
}

absl::StatusOr<FrequencyTensor> Perturb(const FrequencyTensor& t,
                                        const SensitivityMap& s,
                                        const BudgetAllocation& b, Rng& rng,
                                        PerturbStats* stats) {
  auto perturber = LaplacePerturber::Create(s, b);
  if (!perturber.ok()) return perturber.status();
  return perturber->Apply(t, rng, stats);
}

absl::StatusOr<DpBoundReport> VerifyDpBound(const FrequencyTensor& t1,
                                            const FrequencyTensor& t2,
                                            const SensitivityMap& s,
                                            const BudgetAllocation& b,
                                            int64_t draws, Rng& rng) {
  if (draws < 0) return absl::InvalidArgumentError("draws must be non-negative");
  if (auto st = CheckShape(s, t1); !st.ok()) return st;
  if (auto st = CheckShape(s, t2); !st.ok()) return st;
  auto perturber = LaplacePerturber::Create(s, b);
  if (!perturber.ok()) return perturber.status();
  auto distance = TensorDistance(t1, t2, s);
  if (!distance.ok()) return distance.status();

  DpBoundReport report;
  report.draws = draws;
  report.distance = *distance;
  report.bound = b.epsilon_total * *distance;
  report.max_log_ratio = -std::numeric_limits<double>::infinity();
  const auto& scales = perturber->scales();
  for (int64_t d = 0; d < draws; ++d) {
    auto e = perturber->Apply(t1, rng);
    if (!e.ok()) return e.status();
    double ratio = 0.0;
    for (size_t p = 0; p < s.size(); ++p) {
      if (scales[p] == 0.0) continue;
      const double x1 = std::clamp(double(t1.values[p]), double(s.r_min[p]),
                                   double(s.r_max[p]));
      const double x2 = std::clamp(double(t2.values[p]), double(s.r_min[p]),
                                   double(s.r_max[p]));
      const double ev = e->values[p];
      ratio += (std::abs(ev - x2) - std::abs(ev - x1)) / scales[p];
    }
    report.max_log_ratio = std::max(report.max_log_ratio, ratio);
    if (ratio > report.bound + kBoundSlack) ++report.violations;
  }
  if (draws == 0) report.max_log_ratio = 0.0;
  return report;
}

}  // namespace freqdp
