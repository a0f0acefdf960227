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

#include "freqdp/checkpoint.h"

#include <cstring>

#include "absl/strings/str_cat.h"
#include "freqdp/file_util.h"
#include "freqdp/serialization.h"
#include "freqdp/tensor_file.h"

namespace freqdp {
namespace {

constexpr char kMagic[4] = {'F', 'D', 'P', 'K'};
constexpr uint32_t kVersion = 1;
constexpr const char* kBlocks[] = {"theta",          "model_params",   "input_centre",
                                   "input_inv_scale", "model_velocity", "theta_velocity"};

RawTensor VectorBlock(const Eigen::VectorXd& v) {
  RawTensor t;
  t.dims = {uint64_t(v.size())};
  t.values.resize(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) t.values[i] = static_cast<float>(v(i));
  return t;
}

Eigen::VectorXd FromBlock(const RawTensor& t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.values.size()));
  for (size_t i = 0; i < t.values.size(); ++i) v(i) = t.values[i];
  return v;
}

}  // namespace

// Blocks are stored as float32; double-precision state is rounded on save.
std::string EncodeCheckpoint(const Checkpoint& ckpt) {
  const TrainState& st = ckpt.state;
  nlohmann::ordered_json header;
  header["format"] = "freqdp-checkpoint";
  header["config"] = ToJson(ckpt.config);
  header["epoch"] = st.epochs_done;
  const auto& shape = st.model.shape();
  header["model"] = {{"input_dim", shape.input_dim},
                     {"hidden_dim", shape.hidden_dim},
                     {"embed_dim", shape.embed_dim},
                     {"num_classes", shape.num_classes}};
  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (const auto& e : st.history) {
    history.push_back({{"epoch", e.epoch},
                       {"loss", e.loss},
                       {"accuracy", e.accuracy},
                       {"lr_model", e.lr_model}});
  }
  header["metrics"] = st.history.empty() ? nlohmann::ordered_json::object()
                                         : history.back();
  header["history"] = history;
  header["blocks"] = kBlocks;
  header["extra"] = ckpt.extra;

  const std::string json = header.dump();
  std::string out(kMagic, 4);
  for (int i = 0; i < 4; ++i) out.push_back(char((kVersion >> (8 * i)) & 0xff));
  const uint64_t len = json.size();
  for (int i = 0; i < 8; ++i) out.push_back(char((len >> (8 * i)) & 0xff));
  out += json;
  const uint32_t crc = Crc32(
      std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(out.data()), out.size()));
  for (int i = 0; i < 4; ++i) out.push_back(char((crc >> (8 * i)) & 0xff));
  out += EncodeTensor(VectorBlock(st.theta));
  out += EncodeTensor(VectorBlock(st.model.params()));
  out += EncodeTensor(VectorBlock(st.model.input_centre()));
  out += EncodeTensor(VectorBlock(st.model.input_inv_scale()));
  out += EncodeTensor(VectorBlock(st.model_velocity));
  out += EncodeTensor(VectorBlock(st.theta_velocity));
  return out;
}

absl::StatusOr<Checkpoint> DecodeCheckpoint(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    return absl::InvalidArgumentError("not a freqdp checkpoint");
  }
  auto u = [&](size_t i) { return uint64_t(uint8_t(bytes[i])); };
  const uint32_t version = uint32_t(u(4) | u(5) << 8 | u(6) << 16 | u(7) << 24);
  if (version != kVersion) {
    return absl::UnimplementedError(absl::StrCat("checkpoint version ", version));
  }
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= u(8 + i) << (8 * i);
  if (bytes.size() - 16 < len || bytes.size() - 16 - len < 4) {
    return absl::OutOfRangeError("checkpoint header truncated");
  }
  uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i) stored_crc |= uint32_t(u(16 + len + i)) << (8 * i);
  const uint32_t crc = Crc32(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(bytes.data()), 16 + len));
  if (crc != stored_crc) return absl::DataLossError("checkpoint header CRC mismatch");
  nlohmann::json header = nlohmann::json::parse(bytes.substr(16, len), nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    return absl::DataLossError("checkpoint header is not valid JSON");
  }

  Checkpoint ckpt;
  auto cfg = TrainConfigFromJson(header.value("config", nlohmann::json::object()));
  if (!cfg.ok()) return cfg.status();
  ckpt.config = *cfg;
  ckpt.extra = header.value("extra", nlohmann::json::object());

  std::vector<Eigen::VectorXd> blocks;
  size_t pos = 16 + len + 4;
  for (size_t b = 0; b < std::size(kBlocks); ++b) {
    size_t used = 0;
    auto raw = DecodeTensor(
        std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(bytes.data()) + pos,
                                 bytes.size() - pos),
        &used);
    if (!raw.ok()) {
      return absl::Status(raw.status().code(),
                          absl::StrCat("block ", kBlocks[b], ": ", raw.status().message()));
    }
    blocks.push_back(FromBlock(*raw));
    pos += used;
  }

  RecognizerShape shape;
  try {
    const auto& m = header.at("model");
    shape = RecognizerShape{m.at("input_dim").get<int>(), m.at("hidden_dim").get<int>(),
                            m.at("embed_dim").get<int>(), m.at("num_classes").get<int>()};
  } catch (const nlohmann::json::exception& e) {
    return absl::DataLossError(absl::StrCat("checkpoint model shape: ", e.what()));
  }
  Rng unused(0);
  auto model = ToyRecognizer::Create(shape, unused);
  if (!model.ok()) return model.status();
  if (blocks[1].size() != shape.ParameterCount() || blocks[0].size() != shape.input_dim) {
    return absl::DataLossError("checkpoint blocks do not match the model shape");
  }
  model->params() = blocks[1];
  if (auto st = model->SetInputNormalization(blocks[2], blocks[3]); !st.ok()) {
    return absl::DataLossError(st.message());
  }
  TrainState& st = ckpt.state;
  st.model = *std::move(model);
  st.theta = blocks[0];
  st.model_velocity = blocks[4];
  st.theta_velocity = blocks[5];
  st.epochs_done = header.value("epoch", 0);
  for (const auto& e : header.value("history", nlohmann::json::array())) {
    st.history.push_back(EpochStats{e.value("epoch", 0), e.value("loss", 0.0),
                                    e.value("accuracy", 0.0), e.value("lr_model", 0.0)});
  }
  return ckpt;
}

absl::Status SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  return WriteFileAtomic(path, EncodeCheckpoint(ckpt));
}

absl::StatusOr<Checkpoint> LoadCheckpoint(const std::filesystem::path& path) {
  auto bytes = ReadFile(path);
  if (!bytes.ok()) return bytes.status();
  return DecodeCheckpoint(*bytes);
}

}  // namespace freqdp
