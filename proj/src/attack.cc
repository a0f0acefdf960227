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

#include "freqdp/attack.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace freqdp {
namespace {

int LargestOddAtMost(int v) { return v % 2 == 1 ? v : v - 1; }

Eigen::RowVectorXd Flatten(const FrequencyTensor& t) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(t.values.size()));
  for (size_t p = 0; p < t.values.size(); ++p) v(p) = t.values[p];
  return v;
}

Eigen::RowVectorXd Flatten(const RgbImage& img) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(img.data.size()));
  for (size_t p = 0; p < img.data.size(); ++p) v(p) = img.data[p];
  return v;
}

nlohmann::ordered_json PsnrJson(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

absl::StatusOr<double> Psnr(const RgbImage& a, const RgbImage& b) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
    return absl::InvalidArgumentError(absl::StrCat("PSNR of ", a.width, "x", a.height,
                                                   " vs ", b.width, "x", b.height));
  }
  if (a.data.empty()) return absl::InvalidArgumentError("PSNR of empty images");
  double sse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrIdentical;
  const double mse = sse / double(a.data.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double EstimateNoiseSigma(const RgbImage& img) {
  std::vector<double> diffs;
  diffs.reserve(img.data.size());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x + 1 < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        diffs.push_back((double(img.at(x + 1, y, c)) - double(img.at(x, y, c))) /
                        std::sqrt(2.0));
      }
    }
  }
  if (diffs.empty()) return 0.0;
  auto median = [](std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  const double med = median(diffs);
  for (double& d : diffs) d = std::abs(d - med);
  return 1.4826 * median(diffs);
}

absl::StatusOr<RgbImage> NlmDenoise(const RgbImage& img, const NlmParams& params) {
  if (auto s = ValidateImage(img); !s.ok()) return s;
  const int min_dim = std::min(img.width, img.height);
  if (params.patch < 1 || params.window < 1 || params.patch % 2 == 0 ||
      params.window % 2 == 0) {
    return absl::InvalidArgumentError("NLM patch and window sizes must be odd and positive");
  }
  if (params.patch > min_dim || params.window > min_dim) {
    return absl::InvalidArgumentError(absl::StrCat(
        "NLM patch ", params.patch, " / window ", params.window,
        " larger than image ", img.width, "x", img.height));
  }
  if (!(params.h > 0.0)) return absl::InvalidArgumentError("NLM h must be positive");
  const double sigma = params.sigma.value_or(EstimateNoiseSigma(img));
  const double two_sigma2 = 2.0 * sigma * sigma;
  const double inv_h2 = 1.0 / (params.h * params.h);
  const int pr = params.patch / 2, wr = params.window / 2;
  const int w = img.width, h = img.height;
  auto px = [&](int x, int y, int c) {
    return double(img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1), c));
  };
  const double patch_norm = 1.0 / double(params.patch * params.patch * 3);

  RgbImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      double wsum = 0.0;
      for (int qy = std::max(0, y - wr); qy <= std::min(h - 1, y + wr); ++qy) {
        for (int qx = std::max(0, x - wr); qx <= std::min(w - 1, x + wr); ++qx) {
          double d2 = 0.0;
          for (int dy = -pr; dy <= pr; ++dy) {
            for (int dx = -pr; dx <= pr; ++dx) {
              for (int c = 0; c < 3; ++c) {
                const double d = px(x + dx, y + dy, c) - px(qx + dx, qy + dy, c);
                d2 += d * d;
              }
            }
          }
          d2 *= patch_norm;
          const double wgt = std::exp(-std::max(d2 - two_sigma2, 0.0) * inv_h2);
          wsum += wgt;
          for (int c = 0; c < 3; ++c) acc[c] += wgt * img.at(qx, qy, c);
        }
      }
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = static_cast<uint8_t>(
            std::lround(std::clamp(acc[c] / wsum, 0.0, 255.0)));
      }
    }
  }
  return out;
}

absl::StatusOr<RgbImage> WhiteboxAttack(const FrequencyTensor& perturbed,
                                        const std::optional<DcPlanes>& dc_guess,
                                        const TransformConfig& cfg,
                                        const WhiteboxOptions& opts) {
  auto full = InsertDc(perturbed, dc_guess);
  if (!full.ok()) return full.status();
  auto img = InverseTransform(*full, cfg);
  if (!img.ok() || !opts.denoise) return img;
  NlmParams nlm = opts.nlm;
  const int fit = LargestOddAtMost(std::min(img->width, img->height));
  nlm.patch = std::min(nlm.patch, fit);
  nlm.window = std::min(nlm.window, fit);
  return NlmDenoise(*img, nlm);
}

absl::StatusOr<LinearDecoder> LinearDecoder::Train(std::span<const Pair> pairs,
                                                   double lambda) {
  if (pairs.size() < 2) return absl::InvalidArgumentError("need at least 2 training pairs");
  if (!(lambda >= 0.0)) return absl::InvalidArgumentError("ridge lambda must be >= 0");
  const FrequencyTensor& t0 = *pairs.front().input;
  const RgbImage& y0 = *pairs.front().target;
  const auto n = static_cast<Eigen::Index>(pairs.size());
  const auto d = static_cast<Eigen::Index>(t0.values.size());
  const auto out_dim = static_cast<Eigen::Index>(y0.data.size());
  Eigen::MatrixXd x(n, d), y(n, out_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[i];
    if (!p.input->SameShape(t0) || p.target->width != y0.width ||
        p.target->height != y0.height) {
      return absl::InvalidArgumentError("decoder training pairs have inconsistent shapes");
    }
    x.row(i) = Flatten(*p.input);
    y.row(i) = Flatten(*p.target);
  }

  LinearDecoder dec;
  dec.lambda_ = lambda;
  dec.hb_ = t0.hb;
  dec.wb_ = t0.wb;
  dec.channels_ = t0.channels;
  dec.width_ = y0.width;
  dec.height_ = y0.height;
  dec.input_mean_ = x.colwise().mean();
  dec.output_mean_ = y.colwise().mean();
  x.rowwise() -= dec.input_mean_;
  y.rowwise() -= dec.output_mean_;

  dec.dual_ = n <= d;
  const Eigen::MatrixXd gram =
      dec.dual_ ? Eigen::MatrixXd(x * x.transpose()) : Eigen::MatrixXd(x.transpose() * x);
  Eigen::MatrixXd system = gram;
  system.diagonal().array() += lambda;
  const Eigen::MatrixXd rhs = dec.dual_ ? y : Eigen::MatrixXd(x.transpose() * y);
  Eigen::MatrixXd solution;
  if (lambda == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (lu.rank() < system.rows()) {
      return absl::FailedPreconditionError(absl::StrCat(
          "ridge system is singular (rank ", lu.rank(), " of ", system.rows(),
          "); use lambda > 0"));
    }
    solution = lu.solve(rhs);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    if (ldlt.info() != Eigen::Success) {
      return absl::InternalError("ridge factorisation failed");
    }
    solution = ldlt.solve(rhs);
  }
  if (dec.dual_) {
    dec.train_inputs_ = std::move(x);
    dec.coefficients_ = std::move(solution);
  } else {
    dec.weights_ = std::move(solution);
  }
  return dec;
}

absl::StatusOr<RgbImage> LinearDecoder::Decode(const FrequencyTensor& t) const {
  if (t.hb != hb_ || t.wb != wb_ || t.channels != channels_) {
    return absl::InvalidArgumentError("tensor shape does not match the decoder");
  }
  const Eigen::RowVectorXd centred = Flatten(t) - input_mean_;
  Eigen::RowVectorXd y;
  if (dual_) {
    y = output_mean_ + (centred * train_inputs_.transpose()) * coefficients_;
  } else {
    y = output_mean_ + centred * weights_;
  }
  RgbImage img(width_, height_);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    img.data[i] = static_cast<uint8_t>(std::lround(std::clamp(y(i), 0.0, 255.0)));
  }
  return img;
}

double CosineSimilarity(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

absl::StatusOr<double> FeatureSimilarity(const ToyRecognizer& model, const RgbImage& a,
                                         const RgbImage& b, const TransformConfig& cfg) {
  auto ta = ForwardTransformNoDc(a, cfg);
  if (!ta.ok()) return ta.status();
  auto tb = ForwardTransformNoDc(b, cfg);
  if (!tb.ok()) return tb.status();
  if (model.shape().input_dim != static_cast<int>(ta->values.size()) ||
      !ta->SameShape(*tb)) {
    return absl::InvalidArgumentError("image geometry does not match the embedder");
  }
  Eigen::MatrixXd x(2, ta->values.size());
  x.row(0) = Flatten(*ta);
  x.row(1) = Flatten(*tb);
  const Eigen::MatrixXd e = model.Embed(x);
  return CosineSimilarity(e.row(0), e.row(1));
}

Aggregate AttackReport::PsnrStats() const {
  Aggregate a;
  a.min = kPsnrIdentical;
  a.max = -kPsnrIdentical;
  double sum = 0.0;
  for (const auto& r : records) {
    if (std::isinf(r.psnr)) continue;
    sum += r.psnr;
    a.min = std::min(a.min, r.psnr);
    a.max = std::max(a.max, r.psnr);
    ++a.finite;
  }
  if (a.finite == 0) return Aggregate{kPsnrIdentical, kPsnrIdentical, kPsnrIdentical, 0};
  a.mean = sum / double(a.finite);
  return a;
}

std::optional<Aggregate> AttackReport::SimilarityStats() const {
  Aggregate a;
  a.min = 1.0;
  a.max = -1.0;
  double sum = 0.0;
  for (const auto& r : records) {
    if (!r.similarity) continue;
    sum += *r.similarity;
    a.min = std::min(a.min, *r.similarity);
    a.max = std::max(a.max, *r.similarity);
    ++a.finite;
  }
  if (a.finite == 0) return std::nullopt;
  a.mean = sum / double(a.finite);
  return a;
}

nlohmann::ordered_json AttackReport::ToJson() const {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["seed"] = seed;
  j["parameters"] = parameters;
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json e;
    e["index"] = r.index;
    e["label"] = r.label;
    e["psnr"] = PsnrJson(r.psnr);
    if (r.similarity) e["similarity"] = *r.similarity;
    recs.push_back(std::move(e));
  }
  j["records"] = std::move(recs);
  const Aggregate p = PsnrStats();
  j["aggregate"]["psnr"] = {{"mean", PsnrJson(p.mean)},
                            {"min", PsnrJson(p.min)},
                            {"max", PsnrJson(p.max)},
                            {"finite", p.finite}};
  if (auto s = SimilarityStats()) {
    j["aggregate"]["similarity"] = {{"mean", s->mean}, {"min", s->min}, {"max", s->max}};
  }
  return j;
}

std::string AttackReport::ToCsv() const {
  std::string out = "index,label,psnr,similarity\n";
  for (const auto& r : records) {
    absl::StrAppend(&out, r.index, ",", r.label, ",",
                    std::isinf(r.psnr) ? std::string("inf") : absl::StrFormat("%.6f", r.psnr),
                    ",", r.similarity ? absl::StrFormat("%.6f", *r.similarity) : "", "\n");
  }
  return out;
}

}  // namespace freqdp
