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

#ifndef FREQDP_CHECKPOINT_H_
#define FREQDP_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "freqdp/budget_learner.h"
#include "json.hpp"

namespace freqdp {

// Checkpoint container, integers little-endian:
//
//   "FDPK"             4 bytes magic
//   u32 version        currently 1
//   u64 header_length
//   header             UTF-8 JSON: config, epoch, metrics, history, model
//                      shape, and the ordered list of tensor blocks
//   blocks             one FDP1 container per listed block
//
// Blocks: theta, model_params, input_centre, input_inv_scale,
// model_velocity, theta_velocity.
struct Checkpoint {
  TrainState state;
  TrainConfig config;
  nlohmann::json extra;  // caller metadata (sensitivity provenance, ...)
};

std::string EncodeCheckpoint(const Checkpoint& ckpt);
absl::StatusOr<Checkpoint> DecodeCheckpoint(std::string_view bytes);

absl::Status SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
absl::StatusOr<Checkpoint> LoadCheckpoint(const std::filesystem::path& path);

}  // namespace freqdp

#endif  // FREQDP_CHECKPOINT_H_
