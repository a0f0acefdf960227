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

#ifndef FREQDP_FILE_UTIL_H_
#define FREQDP_FILE_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace freqdp {

absl::StatusOr<std::string> ReadFile(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
absl::Status WriteFileAtomic(const std::filesystem::path& path,
                             std::string_view bytes);

uint32_t Crc32(std::span<const uint8_t> bytes);
std::string Sha256Hex(std::string_view bytes);

// SOURCE_DATE_EPOCH when set, otherwise the wall clock, as ISO-8601 UTC.
std::string CreationTimestamp();

}  // namespace freqdp

#endif  // FREQDP_FILE_UTIL_H_
