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

#ifndef FREQDP_DATASET_TRANSFORMER_H_
#define FREQDP_DATASET_TRANSFORMER_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "freqdp/bdct.h"
#include "freqdp/dp_mechanism.h"
#include "freqdp/image.h"
#include "freqdp/pipeline.h"
#include "freqdp/synthetic.h"
#include "json.hpp"

namespace freqdp {

// A labeled image directory is `root/<class>/<image>`; classes are the sorted
// subdirectory names. Images placed directly in `root` form a single class.
struct ImageEntry {
  std::filesystem::path path;
  int label = 0;
};

struct ImageDirectory {
  std::vector<std::string> classes;
  std::vector<ImageEntry> entries;  // sorted by (class, filename)
};

absl::StatusOr<ImageDirectory> ScanImageDirectory(const std::filesystem::path& root);

// Writes `root/class_XXX/NNNNNN.png`.
absl::Status WriteLabeledImages(const LabeledImages& set,
                                const std::filesystem::path& root);

inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string file;  // relative to the dataset root
  int label = 0;
  std::string sha256;
};

// Schema of dst/manifest.json:
//   format "freqdp-dataset", version, image_count, skipped, classes[],
//   tensor_shape [hb, wb, channels], epsilon_total, theta {sha256, provenance},
//   sensitivity {fingerprint, dataset_id, image_count}, master_seed,
//   transform {upsample_factor, kernel}, created_at, files[{file, label, sha256}].
struct DatasetManifest {
  int version = kManifestVersion;
  int64_t image_count = 0;
  int64_t skipped = 0;
  std::vector<std::string> classes;
  int hb = 0;
  int wb = 0;
  int channels = kChannelsWithoutDc;
  double epsilon_total = 0.0;
  std::string theta_sha256;
  nlohmann::json theta_provenance = nlohmann::json::object();
  std::string sensitivity_fingerprint;
  std::string sensitivity_dataset_id;
  int64_t sensitivity_image_count = 0;
  uint64_t master_seed = 0;
  TransformConfig transform;
  std::string created_at;
  std::vector<ManifestEntry> files;

  nlohmann::json ToJson() const;
  static absl::StatusOr<DatasetManifest> FromJson(const nlohmann::json& j);
};

struct TransformOptions {
  TransformConfig transform;
  uint64_t master_seed = 0;
  int workers = 1;
  nlohmann::json theta_provenance = nlohmann::json::object();
};

// Forward transform, DC removal and perturbation of every image under `src`,
// one tensor file per image in `dst/tensors/NNNNNN.fdp`. Image i is perturbed
// with Rng(master_seed, i). Unreadable or mis-shaped images are skipped and
// counted. The manifest is written last and atomically.
absl::StatusOr<DatasetManifest> TransformDataset(const std::filesystem::path& src,
                                                 const SensitivityMap& s,
                                                 const BudgetAllocation& b,
                                                 const TransformOptions& options,
                                                 const std::filesystem::path& dst);

absl::StatusOr<DatasetManifest> ReadManifest(const std::filesystem::path& dst);

// Checks the manifest against the files: presence, hashes, CRCs and shapes.
absl::Status VerifyDataset(const std::filesystem::path& dst);

// Fails if `dst` holds anything other than manifest.json and tensors/*.fdp
// containers with a valid header.
absl::Status ScanForRawPixels(const std::filesystem::path& dst);

struct TransformedDataset {
  DatasetManifest manifest;
  std::vector<FrequencyTensor> tensors;
  std::vector<int> labels;
};

absl::StatusOr<TransformedDataset> LoadTransformedDataset(
    const std::filesystem::path& dst);

}  // namespace freqdp

#endif  // FREQDP_DATASET_TRANSFORMER_H_
