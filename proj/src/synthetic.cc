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

#include "freqdp/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace freqdp {
namespace {

// Face-like template in RGB on [0, 1] coordinates.
void TemplatePixel(double u, double v, double rgb[3]) {
  const double bg[3] = {70, 80, 95};
  const double skin[3] = {205, 160, 135};
  auto blob = [](double du, double dv, double ru, double rv) {
    const double r2 = (du * du) / (ru * ru) + (dv * dv) / (rv * rv);
    return std::exp(-r2 * r2);
  };
  const double face = blob(u - 0.5, v - 0.52, 0.34, 0.44);
  const double eyes = blob(u - 0.36, v - 0.42, 0.07, 0.05) + blob(u - 0.64, v - 0.42, 0.07, 0.05);
  const double mouth = blob(u - 0.5, v - 0.72, 0.14, 0.04);
  const double hair = blob(u - 0.5, v - 0.12, 0.38, 0.12);
  for (int c = 0; c < 3; ++c) {
    double x = bg[c] + face * (skin[c] - bg[c]);
    x -= eyes * (x - 40.0) * 0.8;
    x -= mouth * (x - 90.0 - (c == 0 ? 60.0 : 0.0)) * 0.7;
    x -= hair * (x - 50.0) * 0.6;
    rgb[c] = x;
  }
}

uint8_t ToByte(double v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

LabeledImages GenerateSyntheticFaces(const SyntheticFaceConfig& cfg) {
  Rng rng(cfg.seed, 0x66616365);
  const int n = cfg.size;
  const int order = cfg.basis_order;
  const int nb = order * order - 1;

  // basis[k][y * n + x]
  std::vector<std::vector<double>> basis;
  for (int a = 0; a < order; ++a) {
    for (int b = 0; b < order; ++b) {
      if (a == 0 && b == 0) continue;
      std::vector<double> f(size_t(n) * n);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          f[size_t(y) * n + x] = std::cos(std::numbers::pi * a * (y + 0.5) / n) *
                                 std::cos(std::numbers::pi * b * (x + 0.5) / n);
        }
      }
      basis.push_back(std::move(f));
    }
  }
  // Luma-heavy colour mixing so identities mostly differ in brightness patterns.
  auto draw_coeffs = [&](double strength) {
    std::vector<double> c(size_t(nb) * 3);
    for (int k = 0; k < nb; ++k) {
      const double falloff = strength / (1.0 + 0.35 * k);
      const double luma = falloff * rng.Normal();
      for (int ch = 0; ch < 3; ++ch) {
        c[size_t(k) * 3 + ch] = luma + 0.3 * falloff * rng.Normal();
      }
    }
    return c;
  };

  std::vector<double> tmpl(size_t(n) * n * 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      TemplatePixel((x + 0.5) / n, (y + 0.5) / n, &tmpl[(size_t(y) * n + x) * 3]);
    }
  }

  LabeledImages out;
  for (int id = 0; id < cfg.identities; ++id) {
    const auto identity = draw_coeffs(cfg.identity_strength);
    for (int s = 0; s < cfg.per_identity; ++s) {
      const auto sample = draw_coeffs(cfg.sample_strength);
      RgbImage img(n, n);
      for (size_t p = 0; p < size_t(n) * n; ++p) {
        for (int ch = 0; ch < 3; ++ch) {
          double v = tmpl[p * 3 + ch];
          for (int k = 0; k < nb; ++k) {
            v += (identity[size_t(k) * 3 + ch] + sample[size_t(k) * 3 + ch]) * basis[k][p];
          }
          img.data[p * 3 + ch] = ToByte(v);
        }
      }
      out.images.push_back(std::move(img));
      out.labels.push_back(id);
    }
  }
  return out;
}

LabeledTensors GenerateInformativeTensors(const InformativeTensorConfig& cfg) {
  Rng rng(cfg.seed, 0x696e666f);
  const size_t dim = size_t(cfg.hb) * cfg.wb * kChannelsWithoutDc;
  LabeledTensors out;

  std::vector<size_t> perm(dim);
  std::iota(perm.begin(), perm.end(), size_t{0});
  for (size_t i = dim - 1; i > 0; --i) std::swap(perm[i], perm[rng.UniformInt(i + 1)]);
  out.informative_positions.assign(perm.begin(), perm.begin() + cfg.informative);
  std::sort(out.informative_positions.begin(), out.informative_positions.end());

  // Distinct +-1 codes per class over the informative positions.
  std::vector<std::vector<double>> codes;
  while (static_cast<int>(codes.size()) < cfg.classes) {
    std::vector<double> code(cfg.informative);
    for (double& c : code) c = rng.Uniform01() < 0.5 ? -1.0 : 1.0;
    bool fresh = true;
    for (const auto& other : codes) fresh = fresh && other != code;
    if (fresh || (cfg.informative < 30 &&
                  size_t(cfg.classes) > (size_t{1} << cfg.informative))) {
      codes.push_back(std::move(code));
    }
  }

  for (int c = 0; c < cfg.classes; ++c) {
    for (int s = 0; s < cfg.per_class; ++s) {
      FrequencyTensor t(cfg.hb, cfg.wb, kChannelsWithoutDc);
      for (float& v : t.values) v = static_cast<float>(2.0 * rng.Uniform01() - 1.0);
      for (int i = 0; i < cfg.informative; ++i) {
        const double jitter = cfg.jitter * (2.0 * rng.Uniform01() - 1.0);
        t.values[out.informative_positions[i]] =
            static_cast<float>(codes[c][i] * cfg.separation + jitter);
      }
      out.tensors.push_back(std::move(t));
      out.labels.push_back(c);
    }
  }
  return out;
}

RgbImage RandomImage(int width, int height, Rng& rng) {
  RgbImage img(width, height);
  for (auto& v : img.data) v = static_cast<uint8_t>(rng.UniformInt(256));
  return img;
}

RgbImage GradientImage(int width, int height) {
  RgbImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = (x + y) / double(std::max(1, width + height - 2));
      img.at(x, y, 0) = ToByte(60 + 150 * t);
      img.at(x, y, 1) = ToByte(80 + 100 * t);
      img.at(x, y, 2) = ToByte(120 + 40 * t);
    }
  }
  return img;
}

}  // namespace freqdp
