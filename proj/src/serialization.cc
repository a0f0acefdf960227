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

#include "freqdp/serialization.h"

#include <string>

#include "absl/strings/str_cat.h"
#include "freqdp/file_util.h"
#include "freqdp/tensor_file.h"

namespace freqdp {
namespace {

namespace fs = std::filesystem;

RawTensor Bounds(const SensitivityMap& s, const std::vector<float>& v) {
  return RawTensor{{uint64_t(s.hb), uint64_t(s.wb), uint64_t(s.channels)}, v};
}

absl::StatusOr<nlohmann::json> ReadJson(const fs::path& path) {
  auto text = ReadFile(path);
  if (!text.ok()) return text.status();
  nlohmann::json j = nlohmann::json::parse(*text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    return absl::DataLossError(absl::StrCat("malformed JSON in ", path.string()));
  }
  return j;
}

// Reads a tensor file and checks it against the digest recorded beside it.
absl::StatusOr<RawTensor> ReadVerified(const fs::path& dir, const std::string& name,
                                       const nlohmann::json& entry) {
  auto bytes = ReadFile(dir / name);
  if (!bytes.ok()) return bytes.status();
  if (entry.is_object() && entry.contains("sha256") &&
      entry["sha256"] != Sha256Hex(*bytes)) {
    return absl::DataLossError(absl::StrCat(name, ": sha256 does not match the manifest"));
  }
  return DecodeTensor(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(bytes->data()), bytes->size()));
}

}  // namespace

std::string SensitivityFingerprint(const SensitivityMap& s) {
  return Sha256Hex(EncodeTensor(Bounds(s, s.r_min)) + EncodeTensor(Bounds(s, s.r_max)));
}

absl::Status SaveSensitivityMap(const SensitivityMap& s, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return absl::NotFoundError(absl::StrCat("cannot create ", dir.string()));
  const std::string min_bytes = EncodeTensor(Bounds(s, s.r_min));
  const std::string max_bytes = EncodeTensor(Bounds(s, s.r_max));
  if (auto st = WriteFileAtomic(dir / "sensitivity_min.fdp", min_bytes); !st.ok()) return st;
  if (auto st = WriteFileAtomic(dir / "sensitivity_max.fdp", max_bytes); !st.ok()) return st;
  nlohmann::ordered_json j;
  j["format"] = "freqdp-sensitivity";
  j["version"] = 1;
  j["shape"] = {s.hb, s.wb, s.channels};
  j["image_count"] = s.image_count;
  j["dataset_id"] = s.dataset_id;
  j["zero_range_positions"] = s.size() - s.SupportSize();
  j["created_at"] = CreationTimestamp();
  j["files"] = {{"min", {{"path", "sensitivity_min.fdp"}, {"sha256", Sha256Hex(min_bytes)}}},
                {"max", {{"path", "sensitivity_max.fdp"}, {"sha256", Sha256Hex(max_bytes)}}}};
  return WriteFileAtomic(dir / "sensitivity.json", j.dump(2) + "\n");
}

absl::StatusOr<SensitivityMap> LoadSensitivityMap(const fs::path& dir) {
  auto j = ReadJson(dir / "sensitivity.json");
  if (!j.ok()) return j.status();
  auto lo = ReadVerified(dir, "sensitivity_min.fdp", (*j)["files"]["min"]);
  if (!lo.ok()) return lo.status();
  auto hi = ReadVerified(dir, "sensitivity_max.fdp", (*j)["files"]["max"]);
  if (!hi.ok()) return hi.status();
  if (lo->dims.size() != 3 || lo->dims != hi->dims) {
    return absl::DataLossError("sensitivity bound tensors have mismatched shapes");
  }
  SensitivityMap s;
  s.hb = static_cast<int>(lo->dims[0]);
  s.wb = static_cast<int>(lo->dims[1]);
  s.channels = static_cast<int>(lo->dims[2]);
  s.r_min = std::move(lo->values);
  s.r_max = std::move(hi->values);
  s.image_count = j->value("image_count", int64_t{0});
  s.dataset_id = j->value("dataset_id", std::string());
  for (size_t p = 0; p < s.size(); ++p) {
    if (!(s.r_max[p] >= s.r_min[p])) {
      return absl::DataLossError(absl::StrCat("r_max < r_min at position ", p));
    }
  }
  return s;
}

absl::Status SaveBudgetAllocation(const BudgetAllocation& b, const SensitivityMap& s,
                                  const nlohmann::json& provenance,
                                  const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return absl::NotFoundError(absl::StrCat("cannot create ", dir.string()));
  const std::string theta_bytes = EncodeTensor(Bounds(s, b.theta));
  if (auto st = WriteFileAtomic(dir / "theta.fdp", theta_bytes); !st.ok()) return st;
  nlohmann::ordered_json j;
  j["format"] = "freqdp-budget";
  j["version"] = 1;
  j["epsilon_total"] = b.epsilon_total;
  j["theta"] = {{"path", "theta.fdp"}, {"sha256", Sha256Hex(theta_bytes)}};
  j["provenance"] = provenance;
  return WriteFileAtomic(dir / "budget.json", j.dump(2) + "\n");
}

absl::StatusOr<BudgetAllocation> LoadBudgetAllocation(const SensitivityMap& s,
                                                      const fs::path& dir) {
  auto j = ReadJson(dir / "budget.json");
  if (!j.ok()) return j.status();
  auto theta = ReadVerified(dir, "theta.fdp", (*j)["theta"]);
  if (!theta.ok()) return theta.status();
  if (theta->values.size() != s.size()) {
    return absl::InvalidArgumentError("theta does not match the sensitivity map");
  }
  return AllocateBudgets(s, theta->values, j->value("epsilon_total", 0.0));
}

nlohmann::json ToJson(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["epsilon_total"] = cfg.epsilon_total;
  j["lr_model"] = cfg.lr_model;
  j["lr_theta"] = cfg.lr_theta;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["loss"] = std::string(MarginKindName(cfg.loss));
  j["scale"] = cfg.scale;
  j["margin"] = cfg.margin;
  j["hidden_dim"] = cfg.hidden_dim;
  j["embed_dim"] = cfg.embed_dim;
  j["learn_theta"] = cfg.learn_theta;
  j["perturb"] = cfg.perturb;
  j["warmup_epochs"] = cfg.warmup_epochs;
  j["adaptive_normalization"] = cfg.adaptive_normalization;
  j["seed"] = cfg.seed;
  return j;
}

absl::StatusOr<TrainConfig> TrainConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("train config must be an object");
  TrainConfig cfg;
  try {
    cfg.epsilon_total = j.value("epsilon_total", cfg.epsilon_total);
    cfg.lr_model = j.value("lr_model", cfg.lr_model);
    cfg.lr_theta = j.value("lr_theta", cfg.lr_theta);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    auto kind = ParseMarginKind(j.value("loss", std::string("arcface")));
    if (!kind.ok()) return kind.status();
    cfg.loss = *kind;
    cfg.scale = j.value("scale", cfg.scale);
    cfg.margin = j.value("margin", cfg.margin);
    cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
    cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
    cfg.learn_theta = j.value("learn_theta", cfg.learn_theta);
    cfg.perturb = j.value("perturb", cfg.perturb);
    cfg.warmup_epochs = j.value("warmup_epochs", cfg.warmup_epochs);
    cfg.adaptive_normalization =
        j.value("adaptive_normalization", cfg.adaptive_normalization);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad train config: ", e.what()));
  }
  return cfg;
}

}  // namespace freqdp
