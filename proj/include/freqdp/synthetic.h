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

#ifndef FREQDP_SYNTHETIC_H_
#define FREQDP_SYNTHETIC_H_

#include <cstdint>
#include <vector>

#include "freqdp/bdct.h"
#include "freqdp/image.h"
#include "freqdp/rng.h"

namespace freqdp {

// Desk-scale stand-in for an aligned face dataset: a fixed smooth face-like
// template plus low-frequency cosine perturbations. Each identity owns a set
// of basis coefficients; each sample adds a smaller per-image variation.
struct SyntheticFaceConfig {
  int size = 16;
  int identities = 10;
  int per_identity = 10;
  int basis_order = 4;  // cosine frequencies 0..order-1 per axis, DC excluded
  double identity_strength = 24.0;
  double sample_strength = 6.0;
  uint64_t seed = 1;
};

struct LabeledImages {
  std::vector<RgbImage> images;
  std::vector<int> labels;
};

// Samples are ordered identity-major.
LabeledImages GenerateSyntheticFaces(const SyntheticFaceConfig& cfg);

// Tensors where only `informative` positions (chosen at random) depend on the
// class; every position is otherwise uniform on [-1, 1].
struct InformativeTensorConfig {
  int hb = 1;
  int wb = 1;
  int classes = 4;
  int informative = 5;
  int per_class = 100;
  double separation = 0.8;  // class means are +-separation
  double jitter = 0.2;      // uniform within-class spread
  uint64_t seed = 1;
};

struct LabeledTensors {
  std::vector<FrequencyTensor> tensors;
  std::vector<int> labels;
  std::vector<size_t> informative_positions;
};

LabeledTensors GenerateInformativeTensors(const InformativeTensorConfig& cfg);

RgbImage RandomImage(int width, int height, Rng& rng);

// Smooth diagonal ramp with a gentle colour tilt.
RgbImage GradientImage(int width, int height);

}  // namespace freqdp

#endif  // FREQDP_SYNTHETIC_H_
