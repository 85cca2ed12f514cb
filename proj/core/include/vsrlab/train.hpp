#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsrlab/checkpoint.hpp"
#include "vsrlab/degrade.hpp"
#include "vsrlab/disc.hpp"
#include "vsrlab/gen.hpp"
#include "vsrlab/loss.hpp"

namespace vsrlab::train {

using seq::FrameSequence;

// --- gradient pool ------------------------------------------------------------

// Per-network running sum of parameter gradients plus the number of loss
// contributions behind it. finalize() turns the sum into the mean.
class GradientPool {
 public:
  GradientPool() = default;
  explicit GradientPool(const nn::ParamList& params);

  // Moves each parameter's gradient into the pool (clearing it on the
  // parameter) as the sum of `contributions` loss gradients.
  void absorb(const nn::ParamList& params, int contributions);
  // An unsized pool takes its shapes from the first add.
  void add(const std::vector<Tensor>& grads, int contributions = 1);
  // Divides by the contribution count. No further adds until zero().
  void finalize();
  [[nodiscard]] double global_norm() const;
  // Rescales to `clip_norm` when the global L2 norm exceeds it; returns the
  // norm before clipping.
  double clip(double clip_norm);
  void zero();

  [[nodiscard]] int contributions() const { return count_; }
  [[nodiscard]] bool finalized() const { return finalized_; }
  [[nodiscard]] const std::vector<Tensor>& grads() const { return grads_; }
  [[nodiscard]] std::vector<Tensor>& grads() { return grads_; }

 private:
  std::vector<Tensor> grads_;
  int count_ = 0;
  bool finalized_ = false;
};

// --- optimizer ----------------------------------------------------------------

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig config, const nn::ParamList& params);

  // One update from the (finalized, clipped) pool; zeroes the pool.
  void step(const nn::ParamList& params, GradientPool& pool);
  [[nodiscard]] std::int64_t steps() const { return t_; }
  [[nodiscard]] const OptimizerConfig& config() const { return config_; }

  void append_state(ckpt::Archive& archive, const nn::ParamList& params, const std::string& prefix) const;
  void restore_state(const ckpt::Archive& archive, const nn::ParamList& params, const std::string& prefix);

 private:
  OptimizerConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

// --- configuration --------------------------------------------------------------

enum class PatchOrder { sequential, random };

struct TrainConfig {
  OptimizerConfig optimizer;           // generator; the discriminator shares it
  double disc_learning_rate = 1e-4;
  double clip_norm = 1.0;
  int patch_size = 16;
  int leaf_scale_steps = 2;  // 16 then 32 with the defaults
  bool enable_4x = true;
  int crop_size = 128;
  int seq_len = 3;
  int epochs = 1;
  int crops_per_clip = 1;
  std::uint64_t seed = 0;
  bool augment = true;
  seq::DarkFilter dark;
  Interpolation downsample_method = Interpolation::bicubic;
  PatchOrder patch_order = PatchOrder::sequential;
  int patch_stride = 1;  // per-patch losses on every k-th patch in processing order
  bool mixed_precision = false;  // 16-bit checkpoint weights
  int checkpoint_every = 0;      // epochs; 0 writes only the final checkpoint

  void validate() const;  // ConfigError
  [[nodiscard]] nlohmann::json to_json() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// --- state ------------------------------------------------------------------------

using UpscaleFn = std::function<ag::Var(const ag::Var&)>;

struct TrainState {
  std::unique_ptr<gen::Generator> generator;
  std::unique_ptr<disc::Discriminator> discriminator;  // may be null
  Optimizer gen_optimizer;
  Optimizer disc_optimizer;
  GradientPool gen_pool;
  GradientPool disc_pool;
  Rng rng;

  std::int64_t gen_updates = 0;
  std::int64_t disc_updates = 0;
  std::int64_t crops_trained = 0;
  std::int64_t epochs_done = 0;
  std::int64_t generator_calls = 0;  // every 2x forward pass, counted by the trainer

  // Replaces the generator's forward when set (oracles in tests). The
  // generator's parameters still define the pool and optimizer shapes.
  UpscaleFn upscaler_override;

  static TrainState create(const gen::GeneratorSpec& gspec, const std::optional<disc::DiscriminatorSpec>& dspec,
                           const TrainConfig& config);
  [[nodiscard]] ag::Var upscale(const ag::Var& x);
};

// --- steps ---------------------------------------------------------------------------

// HR crop and its degraded counterpart (same size); the generator input is
// the degraded crop downsampled.
struct Sample {
  FrameSequence hr;
  FrameSequence degraded;
};

struct PassReport {
  loss::LossBundle mean;  // per-term means over this pass's contributions; total is their mean total
  std::map<loss::Term, int> term_counts;  // contributions that evaluated each term
  int patches = 0;
  int patches_scored = 0;  // patches with per-patch losses (not dark, on stride)
  int generator_calls = 0;
  int contributions = 0;
  Shape lr_shape;
  Shape prediction_shape;
  Tensor prediction;  // reassembled output
};

struct LossContext {
  const loss::LossConfig* losses = nullptr;
  const loss::FeatureExtractor* extractor = nullptr;
};

// Grid pass at 2x with the given LR patch size; gradients go to the pools,
// no update.
PassReport train_step_2x(const Sample& sample, TrainState& state, const TrainConfig& config,
                         const LossContext& ctx, int patch_size);
// Grid pass at 4x: each LR patch goes through the generator twice.
PassReport train_step_4x(const Sample& sample, TrainState& state, const TrainConfig& config,
                         const LossContext& ctx);
// The 2x pass repeated at patch size patch_size * 2^level.
PassReport leaf_step(const Sample& sample, TrainState& state, const TrainConfig& config,
                     const LossContext& ctx, int level);

struct CropReport {
  std::vector<PassReport> passes;
  loss::LossBundle mean;  // over every contribution of the crop
  int gen_contributions = 0;
  int disc_contributions = 0;
  double gen_grad_norm = 0.0;   // before clipping
  double disc_grad_norm = 0.0;
  bool disc_updated = false;
};

// All passes for one crop, then one clipped update per network.
CropReport train_on_crop(const Sample& sample, TrainState& state, const TrainConfig& config,
                         const LossContext& ctx);

// --- epochs ---------------------------------------------------------------------------

struct ClipSource {
  std::string id;
  std::filesystem::path dir;                // frames on disk, loaded lazily
  std::optional<FrameSequence> frames;      // or in memory
  [[nodiscard]] int length() const;
  [[nodiscard]] FrameSequence window(int first, int count) const;
};

struct Dataset {
  std::vector<ClipSource> clips;
  // Every sub-directory of root, or the names listed in root/clips.txt.
  static Dataset from_directory(const std::filesystem::path& root);
};

struct ClipRecord {
  std::string clip_id;
  int crop_index = 0;
  int first_frame = 0;
  seq::Origin origin;
  seq::AugmentationSpec augmentation;
  nlohmann::json degradation;
  bool skipped_dark = false;
  double loss_total = 0.0;
};

struct EpochSummary {
  std::int64_t epoch = 0;  // 1-based, counted across resumes
  loss::LossBundle mean;  // mean over trained crops
  int crops_trained = 0;
  int crops_skipped = 0;
  std::vector<ClipRecord> records;
  std::vector<std::string> warnings;
  [[nodiscard]] nlohmann::json to_json() const;
};

EpochSummary train_epoch(const Dataset& dataset, TrainState& state, const TrainConfig& config,
                         const LossContext& ctx, const degrade::DegradationPlan& plan);

// --- checkpoints ---------------------------------------------------------------------------

// gen.* / disc.* weights, optimizer moments and counters.
void save_training_checkpoint(const std::filesystem::path& file, const TrainState& state, const TrainConfig& config);
TrainState load_training_checkpoint(const std::filesystem::path& file, const TrainConfig& config);

// Generator weights alone, readable by load_generator.
void save_generator(const std::filesystem::path& file, const gen::Generator& g, bool half_precision = false);
// Accepts generator-only and training checkpoints.
std::unique_ptr<gen::Generator> load_generator(const std::filesystem::path& file);

}  // namespace vsrlab::train
