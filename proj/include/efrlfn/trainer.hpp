#pragma once

// Single-stage patch training with Adam, checkpointing and JSON-lines logs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "efrlfn/dataset.hpp"
#include "efrlfn/losses.hpp"
#include "efrlfn/metrics.hpp"
#include "efrlfn/model.hpp"

namespace efrlfn {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int scale = 2;
  int patch_size = 64;  // HR pixels
  int batch_size = 16;
  int steps = 1000;
  double learning_rate = 5e-4;
  AdamHyper adam;
  std::uint64_t seed = 0;
  LossWeights loss;
  LossVariant variant = LossVariant::full;
  bool cosine_decay = false;
  double min_learning_rate = 0.0;
  int log_every = 1;
  int eval_every = 0;        // 0 = never; PSNR over the training pairs
  int checkpoint_every = 0;  // 0 = never
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

// Moments are kept in double whatever the model precision.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

// Non-finite gradient or loss. `where` names the parameter or the step.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// HR crop of patch x patch at (y, x) with y, x multiples of r, and the LR
// crop of (patch/r)^2 at (y/r, x/r).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> sample_patches(const Tensor<T>& lr, const Tensor<T>& hr, int scale,
                                               int patch, std::mt19937_64& rng);

// One Adam update using each parameter's accumulated gradient (absent
// gradient = zero). All gradients are checked before anything is modified.
template <typename T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState& state,
               double learning_rate, const AdamHyper& hyper);

struct StepRecord {
  int step = 0;  // 1-based index of the completed step
  double total = 0.0;
  double charb = 0.0;
  double vgg = 0.0;
  double sobel = 0.0;
  double learning_rate = 0.0;
  double elapsed_ms = 0.0;
  std::optional<double> psnr;
};

std::string to_json_line(const StepRecord& record);

template <typename T>
class Trainer {
 public:
  // The model is updated in place. A null extractor selects a seeded
  // ConvStackExtractor for the perceptual term.
  Trainer(Model<T>& model, std::vector<ImagePair<T>> pairs, TrainConfig config,
          std::shared_ptr<const FeatureExtractor<T>> extractor = nullptr);

  StepRecord step();
  // Runs until config.steps total steps; records every log_every-th step
  // (and the last) to `log` when given.
  std::vector<StepRecord> run(std::ostream* log = nullptr);

  int completed_steps() const { return static_cast<int>(state_.t); }
  const AdamState& optimizer() const { return state_; }
  const TrainConfig& config() const { return config_; }

  // Writes <prefix>.efrw (interchange weights, f32) and <prefix>.state
  // (full-precision parameters plus Adam moments).
  void save_checkpoint(const std::filesystem::path& prefix) const;
  // Restores from <prefix>.state; parameters come back bit-exact.
  void load_checkpoint(const std::filesystem::path& prefix);

  // Loss on a fixed batch for the given step index, without updating.
  double peek_loss(int step_index) const;

 private:
  std::pair<Tensor<T>, Tensor<T>> batch_for(int step_index) const;
  double current_lr() const;

  Model<T>& model_;
  std::vector<ImagePair<T>> pairs_;
  TrainConfig config_;
  std::shared_ptr<const FeatureExtractor<T>> extractor_;
  LossFn<T> loss_;
  AdamState state_;
  double elapsed_ms_ = 0.0;
};

template <typename T>
std::vector<StepRecord> train(Model<T>& model, std::vector<ImagePair<T>> pairs,
                              const TrainConfig& config, std::ostream* log = nullptr,
                              std::shared_ptr<const FeatureExtractor<T>> extractor = nullptr);

struct ImageScore {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<ImageScore> images;
  MeanStd psnr;
  MeanStd ssim;
};

template <typename T>
using Upscaler = std::function<Tensor<T>(const Tensor<T>& lr)>;

template <typename T>
EvalReport evaluate(const Upscaler<T>& upscale, std::span<const ImagePair<T>> pairs);

// Clamped model inference on every pair.
template <typename T>
EvalReport evaluate(const Model<T>& model, std::span<const ImagePair<T>> pairs);

// Bicubic upscaling baseline.
template <typename T>
Upscaler<T> bicubic_upscaler(int scale);

}  // namespace efrlfn
