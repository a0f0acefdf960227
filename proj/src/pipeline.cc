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

#include "freqdp/pipeline.h"

namespace freqdp {

absl::StatusOr<FrequencyTensor> ForwardTransform(const RgbImage& img,
                                                 const TransformConfig& cfg) {
  if (auto s = ValidateImage(img); !s.ok()) return s;
  auto up = Upsample(ShiftRange(RgbToYcbcr(img)), cfg.upsample_factor, cfg.kernel);
  if (!up.ok()) return up.status();
  return Tensorize(*up);
}

absl::StatusOr<FrequencyTensor> ForwardTransformNoDc(const RgbImage& img,
                                                     const TransformConfig& cfg) {
  auto t = ForwardTransform(img, cfg);
  if (!t.ok()) return t.status();
  return RemoveDc(*t);
}

absl::StatusOr<RgbImage> InverseTransform(const FrequencyTensor& t,
                                          const TransformConfig& cfg) {
  auto spatial = Detensorize(t);
  if (!spatial.ok()) return spatial.status();
  auto down = Downsample(*spatial, cfg.upsample_factor, cfg.kernel);
  if (!down.ok()) return down.status();
  return YcbcrToRgb(ShiftRange(*std::move(down), 128.f));
}

}  // namespace freqdp
