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

#ifndef FREQDP_SERIALIZATION_H_
#define FREQDP_SERIALIZATION_H_

#include <filesystem>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "freqdp/budget_learner.h"
#include "freqdp/dp_mechanism.h"
#include "json.hpp"

namespace freqdp {

// A sensitivity map on disk is a directory holding
//   sensitivity_min.fdp, sensitivity_max.fdp   FDP1 tensors [hb, wb, channels]
//   sensitivity.json                           shape, image count, dataset id,
//                                              created_at, file hashes
absl::Status SaveSensitivityMap(const SensitivityMap& s,
                                const std::filesystem::path& dir);
absl::StatusOr<SensitivityMap> LoadSensitivityMap(const std::filesystem::path& dir);

// Hash over both bound tensors, used as sensitivity provenance.
std::string SensitivityFingerprint(const SensitivityMap& s);

// A budget allocation on disk: theta.fdp plus budget.json holding
// epsilon_total and free-form provenance.
absl::Status SaveBudgetAllocation(const BudgetAllocation& b, const SensitivityMap& s,
                                  const nlohmann::json& provenance,
                                  const std::filesystem::path& dir);
absl::StatusOr<BudgetAllocation> LoadBudgetAllocation(const SensitivityMap& s,
                                                      const std::filesystem::path& dir);

nlohmann::json ToJson(const TrainConfig& cfg);
absl::StatusOr<TrainConfig> TrainConfigFromJson(const nlohmann::json& j);

}  // namespace freqdp

#endif  // FREQDP_SERIALIZATION_H_
