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

#include "freqdp/dataset_transformer.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "freqdp/file_util.h"
#include "freqdp/serialization.h"
#include "freqdp/tensor_file.h"

namespace freqdp {
namespace fs = std::filesystem;
namespace {

constexpr char kManifestName[] = "manifest.json";
constexpr char kTensorDir[] = "tensors";

bool IsImageFile(const fs::path& p) {
  static const std::set<std::string> kExt = {".png", ".ppm", ".jpg", ".jpeg", ".bmp"};
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return kExt.count(ext) > 0;
}

std::vector<fs::path> SortedImages(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && IsImageFile(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool IsTensorFileName(const std::string& name) {
  if (name.size() != 10 || name.substr(6) != ".fdp") return false;
  return std::all_of(name.begin(), name.begin() + 6,
                     [](char c) { return c >= '0' && c <= '9'; });
}

std::string TensorFileName(size_t index) { return absl::StrFormat("%06d.fdp", index); }

}  // namespace

absl::StatusOr<ImageDirectory> ScanImageDirectory(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    return absl::NotFoundError(absl::StrCat("not a directory: ", root.string()));
  }
  ImageDirectory dir;
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& d : subdirs) {
    auto images = SortedImages(d);
    if (images.empty()) continue;
    const int label = static_cast<int>(dir.classes.size());
    dir.classes.push_back(d.filename().string());
    for (auto& p : images) dir.entries.push_back({std::move(p), label});
  }
  if (dir.classes.empty()) {
    auto images = SortedImages(root);
    if (!images.empty()) {
      dir.classes.push_back(".");
      for (auto& p : images) dir.entries.push_back({std::move(p), 0});
    }
  }
  if (dir.entries.empty()) {
    return absl::InvalidArgumentError(absl::StrCat("no images under ", root.string()));
  }
  return dir;
}

absl::Status WriteLabeledImages(const LabeledImages& set, const fs::path& root) {
  if (set.images.size() != set.labels.size()) {
    return absl::InvalidArgumentError("image/label count mismatch");
  }
  for (size_t i = 0; i < set.images.size(); ++i) {
    const fs::path dir = root / absl::StrFormat("class_%03d", set.labels[i]);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) return absl::InternalError(absl::StrCat("mkdir ", dir.string(), ": ", ec.message()));
    if (auto st = SaveImage(set.images[i], dir / absl::StrFormat("%06d.png", i)); !st.ok()) {
      return st;
    }
  }
  return absl::OkStatus();
}

nlohmann::json DatasetManifest::ToJson() const {
  nlohmann::json j;
  j["format"] = "freqdp-dataset";
  j["version"] = version;
  j["image_count"] = image_count;
  j["skipped"] = skipped;
  j["classes"] = classes;
  j["tensor_shape"] = {hb, wb, channels};
  j["epsilon_total"] = epsilon_total;
  j["theta"] = {{"sha256", theta_sha256}, {"provenance", theta_provenance}};
  j["sensitivity"] = {{"fingerprint", sensitivity_fingerprint},
                      {"dataset_id", sensitivity_dataset_id},
                      {"image_count", sensitivity_image_count}};
  j["master_seed"] = master_seed;
  j["transform"] = {{"upsample_factor", transform.upsample_factor},
                    {"kernel", UpsampleKernelName(transform.kernel)}};
  j["created_at"] = created_at;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& f : files) {
    list.push_back({{"file", f.file}, {"label", f.label}, {"sha256", f.sha256}});
  }
  j["files"] = std::move(list);
  return j;
}

absl::StatusOr<DatasetManifest> DatasetManifest::FromJson(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "freqdp-dataset") {
      return absl::InvalidArgumentError("not a dataset manifest");
    }
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion) {
      return absl::UnimplementedError(absl::StrCat("manifest version ", m.version));
    }
    m.image_count = j.at("image_count").get<int64_t>();
    m.skipped = j.at("skipped").get<int64_t>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    const auto& shape = j.at("tensor_shape");
    m.hb = shape.at(0).get<int>();
    m.wb = shape.at(1).get<int>();
    m.channels = shape.at(2).get<int>();
    m.epsilon_total = j.at("epsilon_total").get<double>();
    m.theta_sha256 = j.at("theta").at("sha256").get<std::string>();
    m.theta_provenance = j.at("theta").value("provenance", nlohmann::json::object());
    const auto& sens = j.at("sensitivity");
    m.sensitivity_fingerprint = sens.at("fingerprint").get<std::string>();
    m.sensitivity_dataset_id = sens.value("dataset_id", "");
    m.sensitivity_image_count = sens.value("image_count", int64_t{0});
    m.master_seed = j.at("master_seed").get<uint64_t>();
    const auto& tr = j.at("transform");
    m.transform.upsample_factor = tr.at("upsample_factor").get<int>();
    auto kernel = ParseUpsampleKernel(tr.at("kernel").get<std::string>());
    if (!kernel.ok()) return kernel.status();
    m.transform.kernel = *kernel;
    m.created_at = j.value("created_at", "");
    for (const auto& f : j.at("files")) {
      m.files.push_back({f.at("file").get<std::string>(), f.at("label").get<int>(),
                         f.at("sha256").get<std::string>()});
    }
    if (static_cast<int64_t>(m.files.size()) != m.image_count) {
      return absl::DataLossError("manifest image_count does not match file list");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    return absl::DataLossError(absl::StrCat("malformed manifest: ", e.what()));
  }
}

absl::StatusOr<DatasetManifest> TransformDataset(const fs::path& src,
                                                 const SensitivityMap& s,
                                                 const BudgetAllocation& b,
                                                 const TransformOptions& options,
                                                 const fs::path& dst) {
  if (options.workers < 1) return absl::InvalidArgumentError("workers must be >= 1");
  auto dir = ScanImageDirectory(src);
  if (!dir.ok()) return dir.status();
  auto perturber = LaplacePerturber::Create(s, b);
  if (!perturber.ok()) return perturber.status();

  const fs::path tensor_dir = dst / kTensorDir;
  std::error_code ec;
  fs::create_directories(tensor_dir, ec);
  if (ec) return absl::InternalError(absl::StrCat("mkdir ", tensor_dir.string(), ": ", ec.message()));
  // A stale manifest would vouch for files about to be replaced.
  fs::remove(dst / kManifestName, ec);
  for (const auto& e : fs::directory_iterator(tensor_dir)) {
    if (e.is_regular_file() && IsTensorFileName(e.path().filename().string())) {
      fs::remove(e.path(), ec);
    }
  }

  const size_t n = dir->entries.size();
  std::vector<std::optional<std::string>> hashes(n);
  std::atomic<size_t> next{0};
  std::mutex mu;
  absl::Status fatal;
  std::vector<std::string> skip_log;

  auto worker = [&]() {
    for (size_t i = next++; i < n; i = next++) {
      {
        std::lock_guard<std::mutex> lock(mu);
        if (!fatal.ok()) return;
      }
      const auto& entry = dir->entries[i];
      auto img = LoadImage(entry.path);
      absl::StatusOr<FrequencyTensor> t = img.ok() ? ForwardTransformNoDc(*img, options.transform)
                                                   : absl::StatusOr<FrequencyTensor>(img.status());
      if (t.ok() && !s.Matches(*t)) {
        t = absl::InvalidArgumentError(absl::StrFormat(
            "shape [%d,%d,%d] does not match sensitivity map [%d,%d,%d]", t->hb, t->wb,
            t->channels, s.hb, s.wb, s.channels));
      }
      if (!t.ok()) {
        std::lock_guard<std::mutex> lock(mu);
        skip_log.push_back(absl::StrCat(entry.path.string(), ": ", t.status().message()));
        continue;
      }
      Rng rng(options.master_seed, i);
      auto noisy = perturber->Apply(*t, rng);
      if (!noisy.ok()) {
        std::lock_guard<std::mutex> lock(mu);
        if (fatal.ok()) fatal = noisy.status();
        return;
      }
      const std::string bytes = EncodeTensor(ToRaw(*noisy));
      if (auto st = WriteFileAtomic(tensor_dir / TensorFileName(i), bytes); !st.ok()) {
        std::lock_guard<std::mutex> lock(mu);
        if (fatal.ok()) fatal = st;
        return;
      }
      hashes[i] = Sha256Hex(bytes);
    }
  };
  const int threads = static_cast<int>(std::min<size_t>(options.workers, n));
  std::vector<std::thread> pool;
  for (int w = 1; w < threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (!fatal.ok()) return fatal;

  std::sort(skip_log.begin(), skip_log.end());
  for (const auto& line : skip_log) std::cerr << "transform: skipped " << line << "\n";

  DatasetManifest m;
  m.classes = dir->classes;
  m.hb = s.hb;
  m.wb = s.wb;
  m.channels = s.channels;
  m.epsilon_total = b.epsilon_total;
  m.theta_sha256 = Sha256Hex(EncodeTensor(RawTensor{{b.theta.size()}, b.theta}));
  m.theta_provenance = options.theta_provenance;
  m.sensitivity_fingerprint = SensitivityFingerprint(s);
  m.sensitivity_dataset_id = s.dataset_id;
  m.sensitivity_image_count = s.image_count;
  m.master_seed = options.master_seed;
  m.transform = options.transform;
  m.created_at = CreationTimestamp();
  for (size_t i = 0; i < n; ++i) {
    if (!hashes[i]) continue;
    m.files.push_back({absl::StrCat(kTensorDir, "/", TensorFileName(i)),
                       dir->entries[i].label, *hashes[i]});
  }
  m.image_count = static_cast<int64_t>(m.files.size());
  m.skipped = static_cast<int64_t>(n - m.files.size());
  if (m.files.empty()) {
    return absl::FailedPreconditionError(
        absl::StrCat("all ", n, " images under ", src.string(), " were skipped"));
  }
  if (auto st = WriteFileAtomic(dst / kManifestName, m.ToJson().dump(2) + "\n"); !st.ok()) {
    return st;
  }
  return m;
}

absl::StatusOr<DatasetManifest> ReadManifest(const fs::path& dst) {
  auto text = ReadFile(dst / kManifestName);
  if (!text.ok()) {
    if (absl::IsNotFound(text.status())) {
      return absl::NotFoundError(absl::StrCat(
          "no manifest in ", dst.string(), " (missing or incomplete transform)"));
    }
    return text.status();
  }
  nlohmann::json j = nlohmann::json::parse(*text, nullptr, false);
  if (j.is_discarded()) return absl::DataLossError("manifest is not valid JSON");
  return DatasetManifest::FromJson(j);
}

absl::Status VerifyDataset(const fs::path& dst) {
  auto m = ReadManifest(dst);
  if (!m.ok()) return m.status();
  for (const auto& f : m->files) {
    if (f.label < 0 || f.label >= static_cast<int>(m->classes.size())) {
      return absl::DataLossError(absl::StrCat(f.file, ": label out of range"));
    }
    auto bytes = ReadFile(dst / f.file);
    if (!bytes.ok()) return bytes.status();
    if (Sha256Hex(*bytes) != f.sha256) {
      return absl::DataLossError(absl::StrCat(f.file, ": sha256 mismatch"));
    }
    auto raw = DecodeTensor({reinterpret_cast<const uint8_t*>(bytes->data()), bytes->size()});
    if (!raw.ok()) {
      return absl::Status(raw.status().code(),
                          absl::StrCat(f.file, ": ", raw.status().message()));
    }
    const std::vector<uint64_t> want = {uint64_t(m->hb), uint64_t(m->wb),
                                        uint64_t(m->channels)};
    if (raw->dims != want) return absl::DataLossError(absl::StrCat(f.file, ": shape mismatch"));
  }
  return absl::OkStatus();
}

absl::Status ScanForRawPixels(const fs::path& dst) {
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dst, ec); it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (ec) return absl::InternalError(ec.message());
    const fs::path rel = fs::relative(it->path(), dst);
    if (it->is_directory()) {
      if (rel != kTensorDir) {
        return absl::FailedPreconditionError(absl::StrCat("unexpected directory ", rel.string()));
      }
      continue;
    }
    if (rel == kManifestName) continue;
    if (rel.parent_path() != kTensorDir || !IsTensorFileName(rel.filename().string())) {
      return absl::FailedPreconditionError(absl::StrCat("unexpected file ", rel.string()));
    }
    auto bytes = ReadFile(it->path());
    if (!bytes.ok()) return bytes.status();
    if (bytes->size() < 4 || bytes->compare(0, 4, "FDP1") != 0) {
      return absl::FailedPreconditionError(absl::StrCat(rel.string(), " is not a tensor file"));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<TransformedDataset> LoadTransformedDataset(const fs::path& dst) {
  auto m = ReadManifest(dst);
  if (!m.ok()) return m.status();
  TransformedDataset out;
  for (const auto& f : m->files) {
    auto t = ReadFrequencyTensor(dst / f.file);
    if (!t.ok()) {
      return absl::Status(t.status().code(), absl::StrCat(f.file, ": ", t.status().message()));
    }
    out.tensors.push_back(std::move(*t));
    out.labels.push_back(f.label);
  }
  out.manifest = std::move(*m);
  return out;
}

}  // namespace freqdp
