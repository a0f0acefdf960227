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

#ifndef FREQDP_TENSOR_FILE_H_
#define FREQDP_TENSOR_FILE_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "freqdp/bdct.h"

namespace freqdp {

// On-disk layout, all integers little-endian:
//
//   "FDP1"            4 bytes magic
//   u32 version       currently 1
//   u32 ndims
//   u64 dims[ndims]
//   f32 payload[prod(dims)]   IEEE-754, little-endian
//   u32 crc32         zlib CRC-32 of every preceding byte
//
// Decoding errors: kInvalidArgument for a bad magic, kUnimplemented for an
// unknown version, kOutOfRange for truncation, kDataLoss for a CRC mismatch.
inline constexpr uint32_t kTensorFileVersion = 1;

struct RawTensor {
  std::vector<uint64_t> dims;
  std::vector<float> values;
};

std::string EncodeTensor(const RawTensor& t);

// Decodes one container starting at the front of `bytes`; `consumed`
// receives its length so containers can be concatenated.
absl::StatusOr<RawTensor> DecodeTensor(std::span<const uint8_t> bytes,
                                       size_t* consumed = nullptr);

absl::Status WriteTensorFile(const std::filesystem::path& path, const RawTensor& t);
absl::StatusOr<RawTensor> ReadTensorFile(const std::filesystem::path& path);

// FrequencyTensors are stored as [hb, wb, channels]; the channel count tells
// whether DC is present.
RawTensor ToRaw(const FrequencyTensor& t);
absl::StatusOr<FrequencyTensor> FromRaw(RawTensor raw);

absl::Status WriteFrequencyTensor(const std::filesystem::path& path,
                                  const FrequencyTensor& t);
absl::StatusOr<FrequencyTensor> ReadFrequencyTensor(const std::filesystem::path& path);

}  // namespace freqdp

#endif  // FREQDP_TENSOR_FILE_H_
