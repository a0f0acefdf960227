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

#ifndef FREQDP_PIPELINE_H_
#define FREQDP_PIPELINE_H_

#include "absl/status/statusor.h"
#include "freqdp/bdct.h"
#include "freqdp/image.h"

namespace freqdp {

struct TransformConfig {
  int upsample_factor = 8;
  UpsampleKernel kernel = UpsampleKernel::kBilinear;
};

// RGB -> YCbCr -> shift to [-128, 127] -> upsample -> blockwise DCT.
// The result still carries its DC channels.
absl::StatusOr<FrequencyTensor> ForwardTransform(const RgbImage& img,
                                                 const TransformConfig& cfg);

// Same as ForwardTransform followed by RemoveDc.
absl::StatusOr<FrequencyTensor> ForwardTransformNoDc(const RgbImage& img,
                                                     const TransformConfig& cfg);

// Inverse DCT -> downsample -> unshift -> RGB (clamped, rounded). Requires DC.
absl::StatusOr<RgbImage> InverseTransform(const FrequencyTensor& t,
                                          const TransformConfig& cfg);

}  // namespace freqdp

#endif  // FREQDP_PIPELINE_H_
