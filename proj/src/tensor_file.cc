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

#include "freqdp/tensor_file.h"

#include <bit>
#include <cstring>
#include <limits>

#include "absl/strings/str_cat.h"
#include "freqdp/file_util.h"

namespace freqdp {
namespace {

constexpr char kMagic[4] = {'F', 'D', 'P', '1'};

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t GetU32(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
  return v;
}

uint64_t GetU64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  return v;
}

absl::Status Truncated(size_t need, size_t have) {
  return absl::OutOfRangeError(
      absl::StrCat("tensor container truncated: need ", need, " bytes, have ", have));
}

}  // namespace

std::string EncodeTensor(const RawTensor& t) {
  std::string out;
  out.reserve(16 + 8 * t.dims.size() + 4 * t.values.size());
  out.append(kMagic, 4);
  PutU32(out, kTensorFileVersion);
  PutU32(out, static_cast<uint32_t>(t.dims.size()));
  for (uint64_t d : t.dims) PutU64(out, d);
  for (float v : t.values) PutU32(out, std::bit_cast<uint32_t>(v));
  const uint32_t crc = Crc32(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(out.data()), out.size()));
  PutU32(out, crc);
  return out;
}

absl::StatusOr<RawTensor> DecodeTensor(std::span<const uint8_t> b,
                                       size_t* consumed) {
  if (b.size() < 4) return Truncated(4, b.size());
  if (std::memcmp(b.data(), kMagic, 4) != 0) {
    return absl::InvalidArgumentError("bad magic: not an FDP1 tensor container");
  }
  if (b.size() < 12) return Truncated(12, b.size());
  const uint32_t version = GetU32(b.data() + 4);
  if (version != kTensorFileVersion) {
    return absl::UnimplementedError(absl::StrCat("unsupported FDP1 version ", version));
  }
  const uint32_t ndims = GetU32(b.data() + 8);
  if (ndims > 16) return absl::DataLossError(absl::StrCat("implausible ndims ", ndims));
  size_t pos = 12;
  if (b.size() < pos + 8 * size_t(ndims)) return Truncated(pos + 8 * ndims, b.size());
  RawTensor t;
  uint64_t count = 1;
  for (uint32_t i = 0; i < ndims; ++i) {
    const uint64_t d = GetU64(b.data() + pos);
    pos += 8;
    if (d != 0 && count > std::numeric_limits<uint64_t>::max() / 4 / d) {
      return absl::DataLossError("tensor dimensions overflow");
    }
    count *= d;
    t.dims.push_back(d);
  }
  const uint64_t need = pos + 4 * count + 4;
  if (b.size() < need) return Truncated(need, b.size());
  const uint32_t crc = Crc32(b.subspan(0, pos + 4 * count));
  if (crc != GetU32(b.data() + pos + 4 * count)) {
    return absl::DataLossError("tensor container CRC mismatch");
  }
  t.values.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    t.values[i] = std::bit_cast<float>(GetU32(b.data() + pos + 4 * i));
  }
  if (consumed != nullptr) *consumed = need;
  return t;
}

absl::Status WriteTensorFile(const std::filesystem::path& path, const RawTensor& t) {
  return WriteFileAtomic(path, EncodeTensor(t));
}

absl::StatusOr<RawTensor> ReadTensorFile(const std::filesystem::path& path) {
  auto bytes = ReadFile(path);
  if (!bytes.ok()) return bytes.status();
  return DecodeTensor(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(bytes->data()), bytes->size()));
}

RawTensor ToRaw(const FrequencyTensor& t) {
  return RawTensor{{uint64_t(t.hb), uint64_t(t.wb), uint64_t(t.channels)}, t.values};
}

absl::StatusOr<FrequencyTensor> FromRaw(RawTensor raw) {
  if (raw.dims.size() != 3) {
    return absl::InvalidArgumentError("frequency tensor must have 3 dimensions");
  }
  const uint64_t c = raw.dims[2];
  if (c != kChannelsWithDc && c != kChannelsWithoutDc) {
    return absl::InvalidArgumentError(absl::StrCat("unexpected channel count ", c));
  }
  if (raw.dims[0] == 0 || raw.dims[1] == 0 || raw.dims[0] > (1u << 20) ||
      raw.dims[1] > (1u << 20)) {
    return absl::InvalidArgumentError("invalid block grid");
  }
  FrequencyTensor t;
  t.hb = static_cast<int>(raw.dims[0]);
  t.wb = static_cast<int>(raw.dims[1]);
  t.channels = static_cast<int>(c);
  t.dc_present = c == kChannelsWithDc;
  t.values = std::move(raw.values);
  return t;
}

absl::Status WriteFrequencyTensor(const std::filesystem::path& path,
                                  const FrequencyTensor& t) {
  return WriteTensorFile(path, ToRaw(t));
}

absl::StatusOr<FrequencyTensor> ReadFrequencyTensor(const std::filesystem::path& path) {
  auto raw = ReadTensorFile(path);
  if (!raw.ok()) return raw.status();
  return FromRaw(*std::move(raw));
}

}  // namespace freqdp
