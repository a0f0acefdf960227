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

// freqdp: calibrate, train, perturb, transform, attack, verify-dp, energy,
// metrics and synth subcommands.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "freqdp/attack.h"
#include "freqdp/bdct.h"
#include "freqdp/budget_learner.h"
#include "freqdp/checkpoint.h"
#include "freqdp/dataset_transformer.h"
#include "freqdp/dp_mechanism.h"
#include "freqdp/file_util.h"
#include "freqdp/pipeline.h"
#include "freqdp/serialization.h"
#include "freqdp/synthetic.h"
#include "freqdp/tensor_file.h"
#include "json.hpp"

namespace freqdp::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInternal = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int ExitCodeFor(const absl::Status& s) {
  switch (s.code()) {
    case absl::StatusCode::kOk:
      return kExitOk;
    case absl::StatusCode::kInternal:
    case absl::StatusCode::kUnknown:
    case absl::StatusCode::kAborted:
    case absl::StatusCode::kCancelled:
    case absl::StatusCode::kUnavailable:
    case absl::StatusCode::kDeadlineExceeded:
      return kExitInternal;
    default:
      return kExitData;
  }
}

// Unwraps a StatusOr, propagating errors out of the subcommand as exceptions.
struct StatusError : std::runtime_error {
  explicit StatusError(absl::Status s)
      : std::runtime_error(std::string(s.message())), status(std::move(s)) {}
  absl::Status status;
};

template <typename T>
T Check(absl::StatusOr<T> v, std::string_view context = "") {
  if (!v.ok()) {
    if (context.empty()) throw StatusError(v.status());
    throw StatusError(absl::Status(v.status().code(),
                                   absl::StrCat(std::string(context), ": ", v.status().message())));
  }
  return *std::move(v);
}

void Check(const absl::Status& s, std::string_view context = "") {
  if (!s.ok()) Check(absl::StatusOr<int>(s), context);
}

std::string ConfigKey(const std::string& name) {
  std::string key = name;
  for (char& c : key) {
    if (c == '-') c = '_';
  }
  return key;
}

// Options of one subcommand. Values come from the command line, then the
// config file, then the defaults held in the bound variables.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* Add(const std::string& name, T* value, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, *value, help)->capture_default_str();
    bindings_.push_back({name, opt, [value](const nlohmann::json& j) { *value = j.get<T>(); },
                         [value]() { return Json(*value); }});
    return opt;
  }

  CLI::Option* Flag(const std::string& name, bool* value, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + name, *value, help);
    bindings_.push_back({name, opt, [value](const nlohmann::json& j) { *value = j.get<bool>(); },
                         [value]() { return Json(*value); }});
    return opt;
  }

  void ApplyConfig(const nlohmann::json& config, const std::string& section) {
    for (auto& b : bindings_) {
      if (b.option->count() > 0) continue;
      const std::string key = ConfigKey(b.name);
      const nlohmann::json* found = nullptr;
      if (config.contains(key)) found = &config[key];
      if (config.contains(section) && config[section].is_object() &&
          config[section].contains(key)) {
        found = &config[section][key];
      }
      if (found == nullptr) continue;
      try {
        b.set(*found);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError(absl::StrCat("config key '", key, "': ", e.what()));
      }
      from_config_.insert(b.name);
    }
  }

  bool Given(const std::string& name) const {
    for (const auto& b : bindings_) {
      if (b.name == name) return b.option->count() > 0 || from_config_.count(name) > 0;
    }
    return false;
  }

  Json Effective() const {
    Json j = Json::object();
    for (const auto& b : bindings_) j[ConfigKey(b.name)] = b.get();
    return j;
  }

 private:
  struct Binding {
    std::string name;
    CLI::Option* option;
    std::function<void(const nlohmann::json&)> set;
    std::function<Json()> get;
  };
  CLI::App* app_;
  std::vector<Binding> bindings_;
  std::set<std::string> from_config_;
};

struct GlobalOptions {
  bool json = false;
  uint64_t seed = 0;
  std::string config;
  std::string report;
  int workers = 1;
  bool quiet = false;
};

struct Context {
  GlobalOptions global;
  std::string command;
  Json config;  // effective configuration, echoed in the report
};

void Warn(const Context& ctx, const std::string& msg) {
  if (!ctx.global.quiet) std::cerr << "warning: " << msg << "\n";
}

std::string HumanValue(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return absl::StrFormat("%.6g", v.get<double>());
  return v.dump();
}

// Prints the report and writes it to --report when given. Human output lists
// the scalar results; --json prints the full document.
void Emit(const Context& ctx, const Json& results) {
  Json doc;
  doc["command"] = ctx.command;
  doc["config"] = ctx.config;
  doc["results"] = results;
  const std::string text = doc.dump(2) + "\n";
  if (!ctx.global.report.empty()) Check(WriteFileAtomic(ctx.global.report, text), "report");
  if (ctx.global.json) {
    std::cout << text;
    return;
  }
  std::cout << ctx.command << "\n";
  for (const auto& [key, value] : results.items()) {
    if (value.is_structured()) continue;
    std::string label = key;
    for (char& c : label) {
      if (c == '_') c = ' ';
    }
    std::cout << "  " << label << ": " << HumanValue(value) << "\n";
  }
}

// Runs fn(i) for i in [0, n) on `workers` threads; returns the error of the
// lowest failing index.
absl::Status ParallelFor(size_t n, int workers,
                         const std::function<absl::Status(size_t)>& fn) {
  std::vector<absl::Status> status(n);
  std::atomic<size_t> next{0};
  auto run = [&]() {
    for (size_t i = next++; i < n; i = next++) status[i] = fn(i);
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min<int>(workers, static_cast<int>(n)); ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  for (auto& s : status) {
    if (!s.ok()) return s;
  }
  return absl::OkStatus();
}

struct PipelineOptions {
  int upsample = 8;
  std::string kernel = "bilinear";

  void Register(OptionSet& o) {
    o.Add("upsample", &upsample, "Upsampling factor before the block DCT");
    o.Add("kernel", &kernel, "Upsampling kernel: bilinear or nearest");
  }
  TransformConfig Config() const {
    if (upsample < 1) throw UsageError("--upsample must be >= 1");
    auto k = ParseUpsampleKernel(kernel);
    if (!k.ok()) throw UsageError(std::string(k.status().message()));
    return TransformConfig{upsample, *k};
  }
};

struct BudgetOptions {
  double epsilon = 1.0;
  std::string budget_mode = "mean";
  std::string budget;  // directory written by `train --budget-out`

  void Register(OptionSet& o) {
    o.Add("epsilon", &epsilon, "Privacy budget (see --budget-mode)");
    o.Add("budget-mode", &budget_mode,
          "mean: --epsilon is the average per supported coefficient; total: the sum");
  }
  void RegisterTheta(OptionSet& o) {
    o.Add("budget", &budget, "Learned budget directory; uniform budgets when empty");
  }
  void Validate() const {
    if (!(epsilon > 0) || !std::isfinite(epsilon)) throw UsageError("--epsilon must be > 0");
    if (budget_mode != "mean" && budget_mode != "total") {
      throw UsageError("--budget-mode must be mean or total");
    }
  }
  double Total(const SensitivityMap& s) const {
    return budget_mode == "mean" ? TotalBudgetFromMean(epsilon, s) : epsilon;
  }
  // Budget directory theta (its own epsilon unless --epsilon was given) or
  // uniform theta.
  BudgetAllocation Resolve(const SensitivityMap& s, const OptionSet& o, Json* provenance) const {
    Validate();
    if (budget.empty()) {
      *provenance = {{"kind", "uniform"}};
      return Check(AllocateBudgets(s, std::vector<float>(s.size(), 0.f), Total(s)));
    }
    BudgetAllocation b = Check(LoadBudgetAllocation(s, budget), "budget");
    const auto meta = Check(ReadFile(fs::path(budget) / "budget.json"), "budget");
    nlohmann::json j = nlohmann::json::parse(meta, nullptr, false);
    *provenance = {{"kind", "learned"},
                   {"theta_sha256", Sha256Hex(EncodeTensor(RawTensor{{b.theta.size()}, b.theta}))},
                   {"source", j.is_object() ? j.value("provenance", nlohmann::json::object())
                                            : nlohmann::json::object()}};
    if (o.Given("epsilon")) b = Check(AllocateBudgets(s, b.theta, Total(s)));
    return b;
  }
};

SensitivityMap LoadSensitivity(const std::string& dir) {
  if (dir.empty()) throw UsageError("--sensitivity is required");
  return Check(LoadSensitivityMap(dir), "sensitivity");
}

struct ImageSet {
  ImageDirectory dir;
  std::vector<RgbImage> images;
  std::vector<FrequencyTensor> tensors;

  std::string Name(size_t i) const {
    const auto& e = dir.entries[i];
    return dir.classes[e.label] == "." ? e.path.filename().string()
                                       : dir.classes[e.label] + "/" + e.path.filename().string();
  }
  std::vector<int> Labels() const {
    std::vector<int> l;
    for (const auto& e : dir.entries) l.push_back(e.label);
    return l;
  }
};

// Loads every image under `root` and runs the forward transform.
ImageSet LoadImageSet(const std::string& root, const TransformConfig& cfg, bool keep_dc,
                      int workers, size_t limit = 0) {
  if (root.empty()) throw UsageError("an image directory is required");
  ImageSet set;
  set.dir = Check(ScanImageDirectory(root));
  if (limit > 0 && set.dir.entries.size() > limit) set.dir.entries.resize(limit);
  const size_t n = set.dir.entries.size();
  set.images.resize(n);
  set.tensors.resize(n);
  Check(ParallelFor(n, workers, [&](size_t i) -> absl::Status {
    const fs::path& p = set.dir.entries[i].path;
    auto img = LoadImage(p);
    if (!img.ok()) return absl::Status(img.status().code(), absl::StrCat(p.string(), ": ", img.status().message()));
    auto t = keep_dc ? ForwardTransform(*img, cfg) : ForwardTransformNoDc(*img, cfg);
    if (!t.ok()) return absl::Status(t.status().code(), absl::StrCat(p.string(), ": ", t.status().message()));
    set.images[i] = *std::move(img);
    set.tensors[i] = *std::move(t);
    return absl::OkStatus();
  }));
  for (size_t i = 1; i < n; ++i) {
    if (!set.tensors[i].SameShape(set.tensors[0])) {
      Check(absl::InvalidArgumentError(absl::StrCat(
          set.dir.entries[i].path.string(), ": image size differs from ",
          set.dir.entries[0].path.string())));
    }
  }
  return set;
}

// Training or evaluation data: a transformed dataset directory (already
// perturbed) or an image directory.
struct TrainingData {
  LabeledSet set;
  bool transformed = false;
  std::string fingerprint;  // of the sensitivity map used by the transform
  double epsilon_total = 0.0;  // budget the transform spent
};

TrainingData LoadTrainingData(const std::string& path, const TransformConfig& cfg,
                              int workers) {
  if (path.empty()) throw UsageError("--data is required");
  TrainingData d;
  if (fs::exists(fs::path(path) / "manifest.json")) {
    auto t = Check(LoadTransformedDataset(path), path);
    d.transformed = true;
    d.fingerprint = t.manifest.sensitivity_fingerprint;
    d.epsilon_total = t.manifest.epsilon_total;
    d.set = Check(MakeLabeledSet(t.tensors, t.labels));
    d.set.num_classes = std::max<int>(d.set.num_classes, static_cast<int>(t.manifest.classes.size()));
  } else {
    ImageSet images = LoadImageSet(path, cfg, false, workers);
    const std::vector<int> labels = images.Labels();
    d.set = Check(MakeLabeledSet(images.tensors, labels));
    d.set.num_classes = std::max<int>(d.set.num_classes, static_cast<int>(images.dir.classes.size()));
  }
  return d;
}

// --- calibrate -------------------------------------------------------------

struct CalibrateCmd {
  std::string images, out, dataset_id;
  PipelineOptions pipeline;

  void Register(OptionSet& o) {
    o.Add("images", &images, "Image directory")->required(false);
    o.Add("out", &out, "Output directory for the sensitivity map");
    o.Add("dataset-id", &dataset_id, "Identifier recorded with the map");
    pipeline.Register(o);
  }

  int Run(Context& ctx) {
    if (out.empty()) throw UsageError("--out is required");
    ImageSet set = LoadImageSet(images, pipeline.Config(), false, ctx.global.workers);
    // Disjoint partitions merged in order give the same map as one pass.
    const int parts = std::max(1, std::min<int>(ctx.global.workers, set.tensors.size()));
    std::vector<SensitivityCalibrator> cal(parts);
    Check(ParallelFor(parts, parts, [&](size_t p) -> absl::Status {
      for (size_t i = p; i < set.tensors.size(); i += parts) {
        if (auto st = cal[p].Add(set.tensors[i]); !st.ok()) return st;
      }
      return absl::OkStatus();
    }));
    for (int p = 1; p < parts; ++p) Check(cal[0].Merge(cal[p]));
    SensitivityMap s = Check(cal[0].Finish(dataset_id.empty() ? fs::path(images).filename().string()
                                                             : dataset_id));
    const size_t zero = s.size() - s.SupportSize();
    if (zero == s.size()) {
      Warn(ctx, "every calibrated range is zero (a single image or identical images); "
                "no coefficient can receive budget, so all budgets must be redistributed "
                "after calibrating on more images");
    } else if (zero > 0) {
      Warn(ctx, absl::StrCat(zero, " of ", s.size(),
                             " positions have zero range; their budget is redistributed to "
                             "the remaining positions"));
    }
    Check(SaveSensitivityMap(s, out), "save");
    Emit(ctx, {{"image_count", s.image_count},
               {"shape", {s.hb, s.wb, s.channels}},
               {"positions", s.size()},
               {"zero_range_positions", zero},
               {"fingerprint", SensitivityFingerprint(s)},
               {"out", out}});
    return kExitOk;
  }
};

// --- train -----------------------------------------------------------------

struct TrainCmd {
  std::string data, sensitivity, out, history, resume, budget_out, eval;
  PipelineOptions pipeline;
  BudgetOptions budget;
  TrainConfig cfg;
  std::string loss = "arcface";
  bool uniform = false, no_perturb = false, fixed_normalization = false;

  void Register(OptionSet& o) {
    o.Add("data", &data, "Image directory or transformed dataset");
    o.Add("sensitivity", &sensitivity, "Sensitivity map directory");
    o.Add("out", &out, "Checkpoint path");
    o.Add("history", &history, "Per-epoch CSV history path");
    o.Add("resume", &resume, "Checkpoint to continue from");
    o.Add("budget-out", &budget_out, "Write the learned budget allocation here");
    o.Add("eval", &eval, "Held-out image directory or transformed dataset");
    pipeline.Register(o);
    budget.Register(o);
    o.Add("epochs", &cfg.epochs, "Epochs");
    o.Add("batch-size", &cfg.batch_size, "Batch size");
    o.Add("lr-model", &cfg.lr_model, "Model learning rate");
    o.Add("lr-theta", &cfg.lr_theta, "Budget-parameter learning rate");
    o.Add("momentum", &cfg.momentum, "SGD momentum");
    o.Add("weight-decay", &cfg.weight_decay, "Weight decay on model weights");
    o.Add("loss", &loss, "arcface or cosface");
    o.Add("scale", &cfg.scale, "Margin-loss scale");
    o.Add("margin", &cfg.margin, "Margin (default 0.4 for arcface, 0.35 for cosface)");
    o.Add("hidden", &cfg.hidden_dim, "Hidden width");
    o.Add("embed", &cfg.embed_dim, "Embedding width");
    o.Flag("uniform", &uniform, "Keep budgets uniform (no theta learning)");
    o.Flag("no-perturb", &no_perturb, "Train on the inputs without noise");
    o.Add("warmup-epochs", &cfg.warmup_epochs,
          "Leading epochs on clean inputs with budgets frozen");
    o.Flag("fixed-normalization", &fixed_normalization,
           "Normalise inputs by the calibrated ranges instead of running statistics");
  }

  int Run(Context& ctx, const OptionSet& o) {
    if (out.empty()) throw UsageError("--out is required");
    const TransformConfig tc = pipeline.Config();
    SensitivityMap s = LoadSensitivity(sensitivity);
    budget.Validate();
    std::optional<Checkpoint> ckpt;
    TrainConfig run = cfg;
    if (!resume.empty()) {
      for (const char* name : {"batch-size", "lr-model", "lr-theta", "momentum", "weight-decay",
                               "loss", "scale", "margin", "hidden", "embed", "uniform",
                               "no-perturb", "epsilon", "budget-mode", "warmup-epochs",
                               "fixed-normalization"}) {
        if (o.Given(name)) {
          throw UsageError(absl::StrCat("--", name,
                                        " cannot be combined with --resume; the checkpoint "
                                        "fixes it (only --epochs may change)"));
        }
      }
      ckpt = Check(LoadCheckpoint(resume), "resume");
      if (ckpt->extra.value("sensitivity_fingerprint", "") != SensitivityFingerprint(s)) {
        Check(absl::FailedPreconditionError(
            "checkpoint was trained with a different sensitivity map"));
      }
      const int epochs = o.Given("epochs") ? cfg.epochs : ckpt->config.epochs;
      run = ckpt->config;
      run.epochs = epochs;
    } else {
      const MarginKind kind = [&] {
        auto k = ParseMarginKind(loss);
        if (!k.ok()) throw UsageError(std::string(k.status().message()));
        return *k;
      }();
      run.loss = kind;
      if (!o.Given("margin")) run.margin = TrainConfig::ForLoss(kind).margin;
      run.epsilon_total = budget.Total(s);
      run.learn_theta = !uniform;
      run.adaptive_normalization = !fixed_normalization;
    }
    run.seed = ctx.global.seed;

    TrainingData train = LoadTrainingData(data, tc, ctx.global.workers);
    if (train.transformed) {
      if (train.fingerprint != SensitivityFingerprint(s)) {
        Check(absl::FailedPreconditionError(
            "dataset was transformed with a different sensitivity map"));
      }
      if (!resume.empty() && ckpt->config.perturb) {
        throw UsageError("checkpoint perturbs its inputs; resume it on image data");
      }
      // The tensors already carry noise; theta cannot be learned through it.
      if (o.Given("epsilon") || o.Given("budget-mode")) {
        throw UsageError("--epsilon does not apply to a transformed dataset; its manifest fixes it");
      }
      run.perturb = false;
      run.learn_theta = false;
      if (resume.empty()) run.epsilon_total = train.epsilon_total;
    } else if (resume.empty()) {
      run.perturb = !no_perturb;
      if (no_perturb) run.learn_theta = false;
    }
    if (auto st = run.Validate(); !st.ok()) throw UsageError(std::string(st.message()));
    if (train.set.num_classes < 2) Check(absl::InvalidArgumentError("need at least 2 classes"));

    Json effective = ctx.config;
    effective["effective_train_config"] = ToJson(run);
    ctx.config = effective;

    TrainResult result =
        Check(TrainBudgets(train.set, s, run, ckpt ? &ckpt->state : nullptr), "train");
    if (result.diverged) {
      Check(absl::OutOfRangeError(absl::StrCat(
          "training diverged at epoch ", result.state.epochs_done,
          " (non-finite loss); lower the learning rates")));
    }
    Checkpoint save;
    save.state = result.state;
    save.config = run;
    save.extra = {{"sensitivity_fingerprint", SensitivityFingerprint(s)},
                  {"input", train.transformed ? "transformed" : "images"},
                  {"transform",
                   {{"upsample_factor", tc.upsample_factor},
                    {"kernel", UpsampleKernelName(tc.kernel)}}}};
    const std::string bytes = EncodeCheckpoint(save);
    Check(WriteFileAtomic(out, bytes), "checkpoint");

    if (!history.empty()) {
      std::string csv = "epoch,loss,accuracy,lr_model\n";
      for (const auto& e : result.state.history) {
        absl::StrAppendFormat(&csv, "%d,%.9g,%.9g,%.9g\n", e.epoch, e.loss, e.accuracy,
                              e.lr_model);
      }
      Check(WriteFileAtomic(history, csv), "history");
    }
    Json results;
    results["epochs_done"] = result.state.epochs_done;
    if (!result.state.history.empty()) {
      results["final_loss"] = result.state.history.back().loss;
      results["final_accuracy"] = result.state.history.back().accuracy;
    }
    results["epsilon_total"] = run.epsilon_total;
    results["input"] = train.transformed ? "transformed" : "images";
    results["checkpoint_sha256"] = Sha256Hex(bytes);

    if (!budget_out.empty()) {
      std::vector<float> theta(result.state.theta.data(),
                               result.state.theta.data() + result.state.theta.size());
      BudgetAllocation b = Check(AllocateBudgets(s, theta, run.epsilon_total));
      Check(SaveBudgetAllocation(b, s,
                                 {{"checkpoint_sha256", Sha256Hex(bytes)},
                                  {"sensitivity_fingerprint", SensitivityFingerprint(s)}},
                                 budget_out),
            "budget-out");
      results["budget_out"] = budget_out;
    }
    if (!eval.empty()) {
      TrainingData held = LoadTrainingData(eval, tc, ctx.global.workers);
      Rng rng(ctx.global.seed, 0x6576616c);
      EvalReport r = Check(Evaluate(result.state.model, held.set, s, result.state.theta,
                                    run.epsilon_total, rng, !held.transformed && run.perturb),
                           "eval");
      results["eval_samples"] = r.samples;
      results["eval_accuracy"] = r.accuracy;
      results["eval_verification_accuracy"] = r.verification_accuracy;
    }
    results["history"] = Json::array();
    for (const auto& e : result.state.history) {
      results["history"].push_back(
          {{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}, {"lr_model", e.lr_model}});
    }
    Emit(ctx, results);
    return kExitOk;
  }
};

// --- perturb ---------------------------------------------------------------

struct PerturbCmd {
  std::string input, out, sensitivity;
  PipelineOptions pipeline;
  BudgetOptions budget;

  void Register(OptionSet& o) {
    o.Add("input", &input, "Image file");
    o.Add("out", &out, "Output tensor file (.fdp)");
    o.Add("sensitivity", &sensitivity, "Sensitivity map directory");
    pipeline.Register(o);
    budget.Register(o);
    budget.RegisterTheta(o);
  }

  int Run(Context& ctx, const OptionSet& o) {
    if (input.empty() || out.empty()) throw UsageError("--input and --out are required");
    const TransformConfig tc = pipeline.Config();
    SensitivityMap s = LoadSensitivity(sensitivity);
    Json provenance;
    BudgetAllocation b = budget.Resolve(s, o, &provenance);
    RgbImage img = Check(LoadImage(input), input);
    FrequencyTensor t = Check(ForwardTransformNoDc(img, tc), input);
    Rng rng(ctx.global.seed, 0);
    PerturbStats stats;
    FrequencyTensor noisy = Check(Perturb(t, s, b, rng, &stats));
    const std::string bytes = EncodeTensor(ToRaw(noisy));
    Check(WriteFileAtomic(out, bytes), "out");
    if (stats.clamped > 0) {
      Warn(ctx, absl::StrCat(stats.clamped, " coefficients fell outside the calibrated range "
                                            "and were clamped"));
    }
    Emit(ctx, {{"shape", {noisy.hb, noisy.wb, noisy.channels}},
               {"epsilon_total", b.epsilon_total},
               {"theta", provenance},
               {"clamped", stats.clamped},
               {"sha256", Sha256Hex(bytes)},
               {"out", out}});
    return kExitOk;
  }
};

// --- transform -------------------------------------------------------------

struct TransformCmd {
  std::string images, out, sensitivity;
  PipelineOptions pipeline;
  BudgetOptions budget;

  void Register(OptionSet& o) {
    o.Add("images", &images, "Labeled image directory (one subdirectory per class)");
    o.Add("out", &out, "Output dataset directory");
    o.Add("sensitivity", &sensitivity, "Sensitivity map directory");
    pipeline.Register(o);
    budget.Register(o);
    budget.RegisterTheta(o);
  }

  int Run(Context& ctx, const OptionSet& o) {
    if (images.empty() || out.empty()) throw UsageError("--images and --out are required");
    TransformOptions opts;
    opts.transform = pipeline.Config();
    SensitivityMap s = LoadSensitivity(sensitivity);
    Json provenance;
    BudgetAllocation b = budget.Resolve(s, o, &provenance);
    opts.master_seed = ctx.global.seed;
    opts.workers = ctx.global.workers;
    opts.theta_provenance = provenance;
    DatasetManifest m = Check(TransformDataset(images, s, b, opts, out), "transform");
    Emit(ctx, {{"image_count", m.image_count},
               {"skipped", m.skipped},
               {"classes", m.classes.size()},
               {"epsilon_total", m.epsilon_total},
               {"theta_sha256", m.theta_sha256},
               {"out", out}});
    return kExitOk;
  }
};

// --- attack ----------------------------------------------------------------

struct AttackCmd {
  std::string mode = "whitebox", images, sensitivity, dc = "zero", guess_image, aux, model,
              csv, recon_dir;
  PipelineOptions pipeline;
  BudgetOptions budget;
  bool denoise = false;
  double nlm_h = 10.0, lambda = 1.0;
  int limit = 0;

  void Register(OptionSet& o) {
    o.Add("mode", &mode, "whitebox or blackbox");
    o.Add("images", &images, "Target image directory");
    o.Add("sensitivity", &sensitivity, "Sensitivity map directory");
    o.Add("dc", &dc, "White-box DC: zero, true or guess");
    o.Add("guess-image", &guess_image, "Image whose DC is used for --dc guess");
    o.Flag("denoise", &denoise, "Apply non-local means to white-box reconstructions");
    o.Add("nlm-h", &nlm_h, "Non-local means filtering strength");
    o.Add("aux", &aux, "Black-box: attacker's auxiliary image directory");
    o.Add("lambda", &lambda, "Black-box ridge regularisation");
    o.Add("model", &model, "Checkpoint for feature similarity (optional)");
    o.Add("limit", &limit, "Attack at most this many target images (0: all)");
    o.Add("csv", &csv, "Per-image CSV output path");
    o.Add("recon-dir", &recon_dir, "Write reconstructions as PNG here");
    pipeline.Register(o);
    budget.Register(o);
    budget.RegisterTheta(o);
  }

  int Run(Context& ctx, const OptionSet& o) {
    if (mode != "whitebox" && mode != "blackbox") throw UsageError("--mode must be whitebox or blackbox");
    if (dc != "zero" && dc != "true" && dc != "guess") throw UsageError("--dc must be zero, true or guess");
    if (dc == "guess" && guess_image.empty()) throw UsageError("--dc guess requires --guess-image");
    if (mode == "blackbox" && aux.empty()) throw UsageError("--mode blackbox requires --aux");
    if (mode == "blackbox" && (o.Given("dc") || denoise)) {
      throw UsageError("--dc and --denoise apply to --mode whitebox only");
    }
    if (limit < 0) throw UsageError("--limit must be >= 0");
    const TransformConfig tc = pipeline.Config();
    SensitivityMap s = LoadSensitivity(sensitivity);
    Json provenance;
    BudgetAllocation b = budget.Resolve(s, o, &provenance);
    auto perturber = Check(LaplacePerturber::Create(s, b));

    ImageSet targets = LoadImageSet(images, tc, true, ctx.global.workers, limit);
    const size_t n = targets.images.size();
    std::vector<FrequencyTensor> noisy(n);
    for (size_t i = 0; i < n; ++i) {
      if (!s.Matches(Check(RemoveDc(targets.tensors[i])))) {
        Check(absl::InvalidArgumentError("target images do not match the sensitivity map"));
      }
    }
    Check(ParallelFor(n, ctx.global.workers, [&](size_t i) -> absl::Status {
      auto ac = RemoveDc(targets.tensors[i]);
      if (!ac.ok()) return ac.status();
      Rng rng(ctx.global.seed, i);
      auto e = perturber.Apply(*ac, rng);
      if (!e.ok()) return e.status();
      noisy[i] = *std::move(e);
      return absl::OkStatus();
    }));

    std::vector<RgbImage> recon(n);
    size_t aux_count = 0;
    if (mode == "whitebox") {
      std::optional<DcPlanes> guess;
      if (dc == "guess") {
        RgbImage g = Check(LoadImage(guess_image), guess_image);
        guess = Check(ExtractDc(Check(ForwardTransform(g, tc), guess_image)));
      }
      WhiteboxOptions wo;
      wo.denoise = denoise;
      wo.nlm.h = nlm_h;
      Check(ParallelFor(n, ctx.global.workers, [&](size_t i) -> absl::Status {
        std::optional<DcPlanes> planes = guess;
        if (dc == "true") {
          auto d = ExtractDc(targets.tensors[i]);
          if (!d.ok()) return d.status();
          planes = *d;
        }
        auto r = WhiteboxAttack(noisy[i], planes, tc, wo);
        if (!r.ok()) return r.status();
        recon[i] = *std::move(r);
        return absl::OkStatus();
      }));
    } else {
      ImageSet aux_set = LoadImageSet(aux, tc, false, ctx.global.workers);
      std::vector<FrequencyTensor> aux_noisy(aux_set.tensors.size());
      Check(ParallelFor(aux_noisy.size(), ctx.global.workers, [&](size_t i) -> absl::Status {
        Rng rng(ctx.global.seed, i, 1);
        auto e = perturber.Apply(aux_set.tensors[i], rng);
        if (!e.ok()) return e.status();
        aux_noisy[i] = *std::move(e);
        return absl::OkStatus();
      }));
      std::vector<LinearDecoder::Pair> pairs;
      for (size_t i = 0; i < aux_noisy.size(); ++i) {
        pairs.push_back({&aux_noisy[i], &aux_set.images[i]});
      }
      aux_count = pairs.size();
      LinearDecoder dec = Check(LinearDecoder::Train(pairs, lambda), "decoder");
      for (size_t i = 0; i < n; ++i) recon[i] = Check(dec.Decode(noisy[i]), "decode");
    }

    std::optional<ToyRecognizer> embedder;
    if (!model.empty()) embedder = Check(LoadCheckpoint(model), "model").state.model;
    AttackReport report;
    report.kind = mode;
    report.seed = ctx.global.seed;
    report.parameters = {{"epsilon_total", b.epsilon_total}, {"theta", provenance}};
    if (mode == "whitebox") {
      report.parameters["dc"] = dc;
      report.parameters["denoise"] = denoise;
    } else {
      report.parameters["lambda"] = lambda;
      report.parameters["aux_images"] = aux_count;
    }
    for (size_t i = 0; i < n; ++i) {
      AttackRecord r;
      r.index = static_cast<int64_t>(i);
      r.label = targets.Name(i);
      r.psnr = Check(Psnr(recon[i], targets.images[i]));
      if (embedder) r.similarity = Check(FeatureSimilarity(*embedder, recon[i], targets.images[i], tc), "similarity");
      report.records.push_back(r);
      if (!recon_dir.empty()) {
        std::error_code ec;
        fs::create_directories(recon_dir, ec);
        Check(SaveImage(recon[i], fs::path(recon_dir) / absl::StrFormat("%06d.png", i)), "recon");
      }
    }
    if (!csv.empty()) Check(WriteFileAtomic(csv, report.ToCsv()), "csv");
    const Aggregate p = report.PsnrStats();
    Json results;
    results["mode"] = mode;
    results["images"] = n;
    results["epsilon_total"] = b.epsilon_total;
    results["mean_psnr"] = p.finite > 0 ? Json(p.mean) : Json("inf");
    if (auto sim = report.SimilarityStats()) results["mean_similarity"] = sim->mean;
    results["report"] = report.ToJson();
    Emit(ctx, results);
    return kExitOk;
  }
};

// --- verify-dp -------------------------------------------------------------

struct VerifyDpCmd {
  int64_t draws = 10000;
  int pairs = 100;
  int hb = 1, wb = 1;
  std::string theta = "random", sensitivity, images;
  PipelineOptions pipeline;
  BudgetOptions budget;

  void Register(OptionSet& o) {
    o.Add("draws", &draws, "Total (pair, draw) combinations");
    o.Add("pairs", &pairs, "Tensor pairs");
    o.Add("hb", &hb, "Synthetic tensor block rows");
    o.Add("wb", &wb, "Synthetic tensor block columns");
    o.Add("theta", &theta, "Synthetic budgets: random or uniform");
    o.Add("sensitivity", &sensitivity, "Use this map and --images instead of synthetic tensors");
    o.Add("images", &images, "Image directory supplying real tensor pairs");
    pipeline.Register(o);
    budget.Register(o);
    budget.RegisterTheta(o);
  }

  int Run(Context& ctx, const OptionSet& o) {
    if (draws < 1 || pairs < 1) throw UsageError("--draws and --pairs must be >= 1");
    if (theta != "random" && theta != "uniform") throw UsageError("--theta must be random or uniform");
    if (sensitivity.empty() != images.empty()) {
      throw UsageError("--sensitivity and --images must be given together");
    }
    Rng rng(ctx.global.seed, 0x76657269);
    SensitivityMap s;
    BudgetAllocation b;
    std::vector<FrequencyTensor> tensors;
    Json provenance;
    if (!sensitivity.empty()) {
      s = LoadSensitivity(sensitivity);
      b = budget.Resolve(s, o, &provenance);
      tensors = LoadImageSet(images, pipeline.Config(), false, ctx.global.workers).tensors;
      if (tensors.size() < 2) Check(absl::InvalidArgumentError("need at least 2 images"));
      if (!s.Matches(tensors[0])) Check(absl::InvalidArgumentError("images do not match the sensitivity map"));
    } else {
      if (hb < 1 || wb < 1) throw UsageError("--hb and --wb must be >= 1");
      budget.Validate();
      s.hb = hb;
      s.wb = wb;
      s.channels = kChannelsWithoutDc;
      const size_t size = size_t(hb) * wb * s.channels;
      for (size_t p = 0; p < size; ++p) {
        const double centre = 20.0 * (rng.Uniform01() - 0.5);
        const double half = 0.1 + 10.0 * rng.Uniform01();
        s.r_min.push_back(static_cast<float>(centre - half));
        s.r_max.push_back(static_cast<float>(centre + half));
      }
      std::vector<float> th(size, 0.f);
      if (theta == "random") {
        for (auto& v : th) v = static_cast<float>(rng.Normal());
      }
      b = Check(AllocateBudgets(s, th, budget.Total(s)));
      provenance = {{"kind", theta}};
      // Samples inside and slightly outside the calibrated range.
      for (int i = 0; i < 2 * pairs; ++i) {
        FrequencyTensor t(hb, wb, s.channels);
        for (size_t p = 0; p < size; ++p) {
          const double lo = s.r_min[p], hi = s.r_max[p];
          t.values[p] = static_cast<float>(lo + (hi - lo) * (1.2 * rng.Uniform01() - 0.1));
        }
        tensors.push_back(std::move(t));
      }
    }
    const int64_t per_pair = (draws + pairs - 1) / pairs;
    int64_t total = 0, violations = 0;
    double max_ratio = -INFINITY, min_slack = INFINITY, max_distance = 0.0;
    for (int k = 0; k < pairs; ++k) {
      const FrequencyTensor& t1 = tensors[(2 * size_t(k)) % tensors.size()];
      const FrequencyTensor& t2 = tensors[(2 * size_t(k) + 1) % tensors.size()];
      Rng pair_rng = rng.Split(k);
      DpBoundReport r = Check(VerifyDpBound(t1, t2, s, b, per_pair, pair_rng));
      total += r.draws;
      violations += r.violations;
      max_ratio = std::max(max_ratio, r.max_log_ratio);
      min_slack = std::min(min_slack, r.bound - r.max_log_ratio);
      max_distance = std::max(max_distance, r.distance);
    }
    Emit(ctx, {{"pairs", pairs},
               {"draws", total},
               {"epsilon_total", b.epsilon_total},
               {"theta", provenance},
               {"max_distance", max_distance},
               {"max_log_ratio", max_ratio},
               {"min_slack", min_slack},
               {"bound_violations", violations}});
    return violations == 0 ? kExitOk : kExitInternal;
  }
};

// --- energy ----------------------------------------------------------------

struct EnergyCmd {
  std::string images, image;
  PipelineOptions pipeline;

  void Register(OptionSet& o) {
    o.Add("images", &images, "Image directory");
    o.Add("image", &image, "Single image");
    pipeline.Register(o);
  }

  int Run(Context& ctx) {
    if (images.empty() == image.empty()) throw UsageError("give exactly one of --images, --image");
    const TransformConfig tc = pipeline.Config();
    std::vector<FrequencyTensor> tensors;
    if (!image.empty()) {
      tensors.push_back(Check(ForwardTransform(Check(LoadImage(image), image), tc), image));
    } else {
      tensors = LoadImageSet(images, tc, true, ctx.global.workers).tensors;
    }
    EnergyProfile e = Check(ComputeEnergyProfile(tensors));
    Json results;
    results["images"] = tensors.size();
    results["dc_fraction"] = e.DcFraction();
    const char* names[3] = {"y", "cb", "cr"};
    for (int c = 0; c < 3; ++c) {
      results[absl::StrCat("dc_fraction_", names[c])] = e.fractions[kDcChannels[c]];
    }
    results["fractions"] = e.fractions;
    Emit(ctx, results);
    return kExitOk;
  }
};

// --- metrics ---------------------------------------------------------------

struct MetricsCmd {
  std::string a, b, model;
  PipelineOptions pipeline;

  void Register(OptionSet& o) {
    o.Add("a", &a, "First image");
    o.Add("b", &b, "Second image");
    o.Add("model", &model, "Checkpoint for feature similarity (optional)");
    pipeline.Register(o);
  }

  int Run(Context& ctx) {
    if (a.empty() || b.empty()) throw UsageError("--a and --b are required");
    RgbImage ia = Check(LoadImage(a), a), ib = Check(LoadImage(b), b);
    const double psnr = Check(Psnr(ia, ib));
    Json results;
    results["psnr"] = std::isinf(psnr) ? Json("inf") : Json(psnr);
    if (!model.empty()) {
      ToyRecognizer m = Check(LoadCheckpoint(model), "model").state.model;
      results["similarity"] = Check(FeatureSimilarity(m, ia, ib, pipeline.Config()));
    }
    Emit(ctx, results);
    return kExitOk;
  }
};

// --- synth -----------------------------------------------------------------

struct SynthCmd {
  std::string out;
  SyntheticFaceConfig cfg;

  void Register(OptionSet& o) {
    o.Add("out", &out, "Output image directory");
    o.Add("identities", &cfg.identities, "Number of identities");
    o.Add("per-identity", &cfg.per_identity, "Images per identity");
    o.Add("size", &cfg.size, "Image side in pixels");
  }

  int Run(Context& ctx) {
    if (out.empty()) throw UsageError("--out is required");
    if (cfg.identities < 1 || cfg.per_identity < 1 || cfg.size < 8 || cfg.size % 8 != 0) {
      throw UsageError("need --identities, --per-identity >= 1 and --size a multiple of 8");
    }
    cfg.seed = ctx.global.seed;
    LabeledImages set = GenerateSyntheticFaces(cfg);
    Check(WriteLabeledImages(set, out));
    Emit(ctx, {{"images", set.images.size()}, {"identities", cfg.identities}, {"out", out}});
    return kExitOk;
  }
};

int Main(int argc, char** argv) {
  CLI::App app{"Frequency-domain differential privacy for images"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions global;
  app.add_flag("--json", global.json, "Print machine-readable JSON reports");
  CLI::Option* seed_opt = app.add_option("--seed", global.seed, "Seed (default: $FREQDP_SEED or 0)");
  app.add_option("--config", global.config, "JSON config; command-line flags take precedence");
  app.add_option("--report", global.report, "Also write the JSON report to this file");
  CLI::Option* workers_opt =
      app.add_option("--workers", global.workers, "Worker threads")->capture_default_str();
  app.add_flag("--quiet", global.quiet, "Suppress warnings");

  struct Entry {
    CLI::App* app;
    std::unique_ptr<OptionSet> options;
    std::function<int(Context&, const OptionSet&)> run;
  };
  std::vector<Entry> entries;
  auto add = [&](const std::string& name, const std::string& help, auto& cmd, auto run) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto options = std::make_unique<OptionSet>(sub);
    cmd.Register(*options);
    entries.push_back({sub, std::move(options), run});
  };
  CalibrateCmd calibrate;
  TrainCmd train;
  PerturbCmd perturb;
  TransformCmd transform;
  AttackCmd attack;
  VerifyDpCmd verify;
  EnergyCmd energy;
  MetricsCmd metrics;
  SynthCmd synth;
  add("calibrate", "Compute the per-coefficient sensitivity map of an image directory",
      calibrate, [&](Context& c, const OptionSet&) { return calibrate.Run(c); });
  add("train", "Jointly train the toy recognizer and the budget allocation", train,
      [&](Context& c, const OptionSet& o) { return train.Run(c, o); });
  add("perturb", "Perturb one image into a private frequency tensor", perturb,
      [&](Context& c, const OptionSet& o) { return perturb.Run(c, o); });
  add("transform", "Convert an image directory into a private tensor dataset", transform,
      [&](Context& c, const OptionSet& o) { return transform.Run(c, o); });
  add("attack", "Reconstruction attacks on perturbed tensors", attack,
      [&](Context& c, const OptionSet& o) { return attack.Run(c, o); });
  add("verify-dp", "Empirically check the privacy-loss bound of the mechanism", verify,
      [&](Context& c, const OptionSet& o) { return verify.Run(c, o); });
  add("energy", "Energy share of each frequency channel", energy,
      [&](Context& c, const OptionSet&) { return energy.Run(c); });
  add("metrics", "PSNR and feature similarity between two images", metrics,
      [&](Context& c, const OptionSet&) { return metrics.Run(c); });
  add("synth", "Write a synthetic labeled face-like image set", synth,
      [&](Context& c, const OptionSet&) { return synth.Run(c); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context ctx;
  try {
    for (auto& e : entries) {
      if (!e.app->parsed()) continue;
      ctx.command = e.app->get_name();
      nlohmann::json config = nlohmann::json::object();
      if (!global.config.empty()) {
        auto text = ReadFile(global.config);
        if (!text.ok()) throw UsageError(absl::StrCat("--config: ", text.status().message()));
        config = nlohmann::json::parse(*text, nullptr, false);
        if (config.is_discarded() || !config.is_object()) {
          throw UsageError("--config must hold a JSON object");
        }
      }
      auto section = [&](const std::string& key) -> const nlohmann::json* {
        if (config.contains(ctx.command) && config[ctx.command].contains(key)) {
          return &config[ctx.command][key];
        }
        return config.contains(key) ? &config[key] : nullptr;
      };
      try {
        if (seed_opt->count() == 0) {
          if (const auto* v = section("seed")) {
            global.seed = v->get<uint64_t>();
          } else if (const char* env = std::getenv("FREQDP_SEED"); env != nullptr) {
            global.seed = std::stoull(env);
          }
        }
        if (workers_opt->count() == 0) {
          if (const auto* v = section("workers")) global.workers = v->get<int>();
        }
      } catch (const std::exception& ex) {
        throw UsageError(absl::StrCat("bad seed or workers setting: ", ex.what()));
      }
      if (global.workers < 1) throw UsageError("--workers must be >= 1");
      e.options->ApplyConfig(config, ctx.command);
      ctx.global = global;
      ctx.config = e.options->Effective();
      ctx.config["seed"] = global.seed;
      ctx.config["workers"] = global.workers;
      return e.run(ctx, *e.options);
    }
  } catch (const UsageError& e) {
    std::cerr << "freqdp " << ctx.command << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const StatusError& e) {
    std::cerr << "freqdp " << ctx.command << ": " << e.status.ToString() << "\n";
    return ExitCodeFor(e.status);
  } catch (const std::exception& e) {
    std::cerr << "freqdp " << ctx.command << ": internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace freqdp::cli

int main(int argc, char** argv) { return freqdp::cli::Main(argc, argv); }
