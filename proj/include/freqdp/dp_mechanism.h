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

#ifndef FREQDP_DP_MECHANISM_H_
#define FREQDP_DP_MECHANISM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "freqdp/bdct.h"
#include "freqdp/rng.h"

namespace freqdp {

// Per-position coefficient bounds [r_min, r_max] observed over a calibration
// set, laid out like the tensors they calibrate.
struct SensitivityMap {
  int hb = 0;
  int wb = 0;
  int channels = kChannelsWithoutDc;
  std::vector<float> r_min;
  std::vector<float> r_max;
  std::string dataset_id;
  int64_t image_count = 0;

  size_t size() const { return r_min.size(); }
  double Range(size_t p) const { return double(r_max[p]) - double(r_min[p]); }
  bool Matches(const FrequencyTensor& t) const {
    return t.hb == hb && t.wb == wb && t.channels == channels;
  }
  // Positions with r_max > r_min. Only these receive budget and noise.
  std::vector<uint8_t> SupportMask() const;
  size_t SupportSize() const;
};

// Streaming element-wise min/max. Calibrators over disjoint partitions can be
// merged in any order.
class SensitivityCalibrator {
 public:
  absl::Status Add(const FrequencyTensor& t);
  absl::Status Merge(const SensitivityCalibrator& other);
  int64_t count() const { return count_; }
  absl::StatusOr<SensitivityMap> Finish(std::string dataset_id = "") const;

 private:
  int64_t count_ = 0;
  SensitivityMap acc_;
};

absl::StatusOr<SensitivityMap> CalibrateSensitivity(
    std::span<const FrequencyTensor> tensors, std::string dataset_id = "");

// |x1 - x2| / (r_max - r_min). Inputs outside the range are clamped first and
// counted in `clamped` when given. Zero ranges are rejected.
absl::StatusOr<double> ElementDistance(double x1, double x2, double r_min,
                                       double r_max, int64_t* clamped = nullptr);

// Max element distance over all positions with a non-zero range.
absl::StatusOr<double> TensorDistance(const FrequencyTensor& t1,
                                      const FrequencyTensor& t2,
                                      const SensitivityMap& s,
                                      int64_t* clamped = nullptr);

// epsilon_total * softmax(theta), with the softmax taken over `support`
// (every position when `support` is empty). Positions outside the support get
// a zero budget.
struct BudgetAllocation {
  std::vector<float> theta;
  double epsilon_total = 0.0;
  std::vector<double> budgets;
  std::vector<uint8_t> support;

  size_t size() const { return theta.size(); }
};

absl::StatusOr<BudgetAllocation> AllocateBudgets(
    std::span<const float> theta, double epsilon_total,
    std::span<const uint8_t> support = {});

// Budgets for a sensitivity map: softmax restricted to its support.
absl::StatusOr<BudgetAllocation> AllocateBudgets(const SensitivityMap& s,
                                                 std::span<const float> theta,
                                                 double epsilon_total);

// epsilon_total that gives every supported position `epsilon_mean` on average.
double TotalBudgetFromMean(double epsilon_mean, const SensitivityMap& s);

// Laplace scales (r_max - r_min) / budget; exactly 0 on zero-range positions.
absl::StatusOr<std::vector<double>> ComputeNoiseScales(const SensitivityMap& s,
                                                       const BudgetAllocation& b);

// Inverse-CDF Laplace draw; scale 0 returns exactly 0.
double SampleLaplace(double scale, Rng& rng);

struct PerturbStats {
  int64_t clamped = 0;  // inputs outside [r_min, r_max] before noise
};

// Laplace mechanism bound to a sensitivity map and budget allocation.
// Immutable after construction; Apply may be called concurrently with
// distinct generators.
class LaplacePerturber {
 public:
  static absl::StatusOr<LaplacePerturber> Create(const SensitivityMap& s,
                                                 const BudgetAllocation& b);

  // Clamps into the calibrated range, then adds scale * unit Laplace draws,
  // one draw per position in storage order.
  absl::StatusOr<FrequencyTensor> Apply(const FrequencyTensor& t, Rng& rng,
                                        PerturbStats* stats = nullptr) const;

  const std::vector<double>& scales() const { return scales_; }
  const SensitivityMap& sensitivity() const { return sensitivity_; }

 private:
  LaplacePerturber(SensitivityMap s, std::vector<double> scales)
      : sensitivity_(std::move(s)), scales_(std::move(scales)) {}

  SensitivityMap sensitivity_;
  std::vector<double> scales_;
};

absl::StatusOr<FrequencyTensor> Perturb(const FrequencyTensor& t,
                                        const SensitivityMap& s,
                                        const BudgetAllocation& b, Rng& rng,
                                        PerturbStats* stats = nullptr);

struct DpBoundReport {
  int64_t draws = 0;
  double distance = 0.0;        // d(t1, t2)
  double bound = 0.0;           // epsilon_total * d(t1, t2)
  double max_log_ratio = 0.0;   // max over draws of log p(E|t1) - log p(E|t2)
  int64_t violations = 0;       // draws with log ratio > bound + 1e-9
};

// Samples E = Perturb(t1) and evaluates the exact Laplace log-density ratio
// against t2 in double precision.
absl::StatusOr<DpBoundReport> VerifyDpBound(const FrequencyTensor& t1,
                                            const FrequencyTensor& t2,
                                            const SensitivityMap& s,
                                            const BudgetAllocation& b,
                                            int64_t draws, Rng& rng);

}  // namespace freqdp

#endif  // FREQDP_DP_MECHANISM_H_
