#include "vsrlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vsrlab/errors.hpp"
#include "vsrlab/frame_io.hpp"

namespace vsrlab::train {
namespace {

using loss::Term;

// Running per-term sums; a term's mean is over the contributions that evaluated it.
struct BundleSums {
  std::map<Term, double> sum;
  std::map<Term, int> count;
  double total = 0.0;
  int contributions = 0;

  void add(const loss::LossBundle& b) {
    for (const auto& [t, v] : b.values) {
      sum[t] += v;
      count[t] += 1;
    }
    total += b.total;
    contributions += 1;
  }

  void merge(const loss::LossBundle& mean, const std::map<Term, int>& counts, int n) {
    for (const auto& [t, v] : mean.values) {
      const int c = counts.count(t) ? counts.at(t) : 0;
      sum[t] += v * c;
      count[t] += c;
    }
    total += mean.total * n;
    contributions += n;
  }

  [[nodiscard]] loss::LossBundle mean() const {
    loss::LossBundle b;
    for (const auto& [t, s] : sum) b.values[t] = s / count.at(t);
    b.total = contributions > 0 ? total / contributions : 0.0;
    return b;
  }
};

bool is_whole_image_term(Term t) { return t == Term::ssim_loss || t == Term::perceptual; }

std::vector<Term> patch_terms(bool adversarial) {
  std::vector<Term> out;
  for (Term t : loss::all_terms()) {
    if (is_whole_image_term(t)) continue;
    if (t == Term::adversarial && !adversarial) continue;
    out.push_back(t);
  }
  return out;
}

bool any_whole_image_term(const loss::LossConfig& lc) {
  return lc.weight(Term::ssim_loss) > 0.0 || lc.weight(Term::perceptual) > 0.0;
}

bool adversarial_active(const TrainState& state, const loss::LossConfig& lc) {
  if (lc.weight(Term::adversarial) <= 0.0) return false;
  if (!state.discriminator) throw ConfigError("adversarial loss weight > 0 needs a discriminator");
  return true;
}

std::vector<int> processing_order(int count, const TrainConfig& config, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[i] = i;
  if (config.patch_order == PatchOrder::random) {
    for (int i = count - 1; i > 0; --i) std::swap(order[i], order[uniform_int(rng, 0, i)]);
  }
  return order;
}

const LossContext& checked(const LossContext& ctx) {
  if (!ctx.losses) throw ConfigError("training needs a loss configuration");
  return ctx;
}

// One grid pass: split the LR input, run `cascade` generator passes per
// patch, score patches and the reassembled prediction, and push gradients
// into the pools.
PassReport run_pass(const FrameSequence& lr, const FrameSequence& hr, int patch, int cascade,
                    TrainState& state, const TrainConfig& config, const LossContext& ctx) {
  const auto& lc = *checked(ctx).losses;
  const int factor = 1 << cascade;
  if (hr.height() != lr.height() * factor || hr.width() != lr.width() * factor) {
    throw ShapeError("HR crop does not match LR input at x" + std::to_string(factor));
  }
  const seq::PatchGrid lr_grid = seq::split_into_grid(lr, patch);
  const seq::PatchGrid hr_grid = seq::split_into_grid(hr, patch * factor);
  const int count = static_cast<int>(lr_grid.patches.size());

  const bool adv = adversarial_active(state, lc);
  const bool whole = any_whole_image_term(lc);
  const auto gen_params = state.generator->parameters();
  nn::ParamList disc_params;
  if (state.discriminator) {
    disc_params = state.discriminator->parameters();
    nn::set_trainable(disc_params, false);
  }

  PassReport report;
  report.patches = count;
  report.lr_shape = lr.tensor().shape();
  BundleSums sums;
  loss::LossInputs patch_inputs;
  patch_inputs.extractor = ctx.extractor;
  patch_inputs.subset = patch_terms(adv);

  std::vector<ag::Var> outs(static_cast<std::size_t>(count));
  std::vector<int> scored;
  ag::Var pending;
  const auto order = processing_order(count, config, state.rng);
  for (int k = 0; k < count; ++k) {
    const int idx = order[k];
    ag::Var x = ag::constant(lr_grid.patches[idx].frames.tensor());
    for (int s = 0; s < cascade; ++s) {
      x = state.upscale(x);
      ++report.generator_calls;
    }
    outs[idx] = whole ? x : ag::detach(x);

    if (k % config.patch_stride != 0 || seq::is_too_dark(lr_grid.patches[idx].frames, config.dark)) continue;
    if (adv) patch_inputs.fake_logits = state.discriminator->forward(x);
    const auto bundle = loss::total_loss(ag::constant(hr_grid.patches[idx].frames.tensor()), x, lc, patch_inputs);
    scored.push_back(idx);
    if (!bundle.total_var) continue;
    sums.add(bundle);
    if (whole) {
      pending = pending ? ag::add(pending, bundle.total_var) : bundle.total_var;
    } else {
      ag::backward(bundle.total_var);
    }
  }
  report.patches_scored = static_cast<int>(scored.size());

  const ag::Var prediction = ag::assemble_grid(outs, lr_grid.grid_rows, lr_grid.grid_cols);
  if (whole) {
    loss::LossInputs in;
    in.extractor = ctx.extractor;
    in.subset = std::vector<Term>{Term::ssim_loss, Term::perceptual};
    const auto bundle = loss::total_loss(ag::constant(hr.tensor()), prediction, lc, in);
    sums.add(bundle);
    pending = pending ? ag::add(pending, bundle.total_var) : bundle.total_var;
    ag::backward(pending);
  }
  report.prediction = prediction.value();
  report.prediction_shape = report.prediction.shape();
  report.contributions = sums.contributions;
  report.mean = sums.mean();
  report.term_counts = sums.count;
  state.gen_pool.absorb(gen_params, sums.contributions);

  if (adv) {
    nn::set_trainable(disc_params, true);
    for (int idx : scored) {
      const ag::Var fake = ag::constant(outs[idx].value());
      const ag::Var real = ag::constant(hr_grid.patches[idx].frames.tensor());
      const ag::Var d = loss::adversarial(state.discriminator->forward(fake), state.discriminator->forward(real),
                                          loss::Side::discriminator);
      ag::backward(d);
    }
    state.disc_pool.absorb(disc_params, static_cast<int>(scored.size()));
  } else if (state.discriminator) {
    nn::set_trainable(disc_params, true);
  }
  return report;
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

// --- gradient pool -------------------------------------------------------------

GradientPool::GradientPool(const nn::ParamList& params) {
  for (const auto& p : params) grads_.emplace_back(p.var.shape());
}

void GradientPool::absorb(const nn::ParamList& params, int contributions) {
  if (params.size() != grads_.size()) throw ShapeError("gradient pool: parameter count mismatch");
  if (finalized_) throw ConsistencyError("gradient pool already finalized");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto v = params[i].var;
    if (v.shape() != grads_[i].shape()) throw ShapeError("gradient pool: shape mismatch for " + params[i].name);
    if (v.has_grad()) grads_[i] += v.grad();
    v.zero_grad();
  }
  count_ += contributions;
}

void GradientPool::add(const std::vector<Tensor>& grads, int contributions) {
  if (grads_.empty() && count_ == 0) {
    for (const auto& g : grads) grads_.emplace_back(g.shape());
  }
  if (grads.size() != grads_.size()) throw ShapeError("gradient pool: gradient count mismatch");
  if (finalized_) throw ConsistencyError("gradient pool already finalized");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != grads_[i].shape()) throw ShapeError("gradient pool: shape mismatch");
    grads_[i] += grads[i];
  }
  count_ += contributions;
}

void GradientPool::finalize() {
  if (finalized_) return;
  if (count_ > 0) {
    const float inv = 1.0f / static_cast<float>(count_);
    for (auto& g : grads_) g *= inv;
  }
  finalized_ = true;
}

double GradientPool::global_norm() const {
  double s = 0.0;
  for (const auto& g : grads_) s += g.squared_norm();
  return std::sqrt(s);
}

double GradientPool::clip(double clip_norm) {
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be > 0");
  const double norm = global_norm();
  if (norm > clip_norm) {
    const auto s = static_cast<float>(clip_norm / norm);
    for (auto& g : grads_) g *= s;
  }
  return norm;
}

void GradientPool::zero() {
  for (auto& g : grads_) g.fill(0.0f);
  count_ = 0;
  finalized_ = false;
}

// --- optimizer -------------------------------------------------------------------

Optimizer::Optimizer(OptimizerConfig config, const nn::ParamList& params) : config_(config) {
  if (config_.kind == OptimizerKind::adam) {
    for (const auto& p : params) {
      m_.emplace_back(p.var.shape());
      v_.emplace_back(p.var.shape());
    }
  }
}

void Optimizer::step(const nn::ParamList& params, GradientPool& pool) {
  const auto& grads = pool.grads();
  if (grads.size() != params.size()) throw ShapeError("optimizer: pool does not match parameters");
  ++t_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto var = params[i].var;
      Tensor& w = var.mutable_value();
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = static_cast<float>(w[j] - lr * grads[i][j]);
    }
  } else {
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto var = params[i].var;
      Tensor& w = var.mutable_value();
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double g = grads[i][j];
        const double mj = b1 * m[j] + (1.0 - b1) * g;
        const double vj = b2 * v[j] + (1.0 - b2) * g * g;
        m[j] = static_cast<float>(mj);
        v[j] = static_cast<float>(vj);
        w[j] = static_cast<float>(w[j] - lr * (mj / c1) / (std::sqrt(vj / c2) + config_.epsilon));
      }
    }
  }
  pool.zero();
}

void Optimizer::append_state(ckpt::Archive& archive, const nn::ParamList& params, const std::string& prefix) const {
  archive.meta["optimizers"][prefix] = {{"steps", t_}};
  for (std::size_t i = 0; i < m_.size(); ++i) {
    archive.tensors.push_back({prefix + "m." + params[i].name, m_[i]});
    archive.tensors.push_back({prefix + "v." + params[i].name, v_[i]});
  }
}

void Optimizer::restore_state(const ckpt::Archive& archive, const nn::ParamList& params, const std::string& prefix) {
  try {
    t_ = archive.meta.at("optimizers").at(prefix).at("steps").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("checkpoint lacks optimizer state " + prefix);
  }
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const Tensor* m = archive.find(prefix + "m." + params[i].name);
    const Tensor* v = archive.find(prefix + "v." + params[i].name);
    if (!m || !v || m->shape() != m_[i].shape() || v->shape() != v_[i].shape()) {
      throw ConsistencyError("checkpoint optimizer moments missing or mismatched for " + params[i].name);
    }
    m_[i] = *m;
    v_[i] = *v;
  }
}

// --- config ----------------------------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train: " + m); };
  if (!(optimizer.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(disc_learning_rate > 0.0)) fail("disc_learning_rate must be > 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    fail("betas must be in [0, 1)");
  }
  if (!(optimizer.epsilon > 0.0)) fail("epsilon must be > 0");
  if (!(clip_norm > 0.0)) fail("clip_norm must be > 0");
  if (patch_size < 1) fail("patch_size must be >= 1");
  if (leaf_scale_steps < 1 || leaf_scale_steps > 6) fail("leaf_scale_steps must be in [1, 6]");
  const int need = 2 * patch_size * (1 << (leaf_scale_steps - 1));
  if (crop_size < 1 || crop_size % need != 0) {
    fail("crop_size " + std::to_string(crop_size) + " must be divisible by " + std::to_string(need));
  }
  if (enable_4x && crop_size % (4 * patch_size) != 0) {
    fail("crop_size must be divisible by 4 * patch_size for the 4x pass");
  }
  if (seq_len < 1) fail("seq_len must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (crops_per_clip < 1) fail("crops_per_clip must be >= 1");
  if (patch_stride < 1) fail("patch_stride must be >= 1");
  if (!(dark.threshold >= 0.0 && dark.threshold <= 1.0)) fail("dark threshold must be in [0, 1]");
  if (dark.border_width < 1) fail("dark border_width must be >= 1");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"optimizer", optimizer.kind == OptimizerKind::adam ? "adam" : "sgd"},
          {"learning_rate", optimizer.learning_rate},
          {"beta1", optimizer.beta1},
          {"beta2", optimizer.beta2},
          {"epsilon", optimizer.epsilon},
          {"disc_learning_rate", disc_learning_rate},
          {"clip_norm", clip_norm},
          {"patch_size", patch_size},
          {"leaf_scale_steps", leaf_scale_steps},
          {"enable_4x", enable_4x},
          {"crop_size", crop_size},
          {"seq_len", seq_len},
          {"epochs", epochs},
          {"crops_per_clip", crops_per_clip},
          {"seed", seed},
          {"augment", augment},
          {"dark_threshold", dark.threshold},
          {"dark_check_borders", dark.check_borders},
          {"dark_border_width", dark.border_width},
          {"downsample", downsample_method == Interpolation::bicubic ? "bicubic" : "bilinear"},
          {"patch_order", patch_order == PatchOrder::sequential ? "sequential" : "random"},
          {"patch_stride", patch_stride},
          {"mixed_precision", mixed_precision},
          {"checkpoint_every", checkpoint_every}};
}

// --- state -------------------------------------------------------------------------------

TrainState TrainState::create(const gen::GeneratorSpec& gspec, const std::optional<disc::DiscriminatorSpec>& dspec,
                              const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.generator = std::make_unique<gen::Generator>(gspec, derive_seed(config.seed, 1));
  const auto gp = s.generator->parameters();
  s.gen_pool = GradientPool(gp);
  s.gen_optimizer = Optimizer(config.optimizer, gp);
  if (dspec) {
    s.discriminator = std::make_unique<disc::Discriminator>(*dspec, derive_seed(config.seed, 2));
    const auto dp = s.discriminator->parameters();
    s.disc_pool = GradientPool(dp);
    OptimizerConfig dc = config.optimizer;
    dc.learning_rate = config.disc_learning_rate;
    s.disc_optimizer = Optimizer(dc, dp);
  }
  s.rng.seed(derive_seed(config.seed, 3));
  return s;
}

ag::Var TrainState::upscale(const ag::Var& x) {
  ++generator_calls;
  return upscaler_override ? upscaler_override(x) : generator->forward(x);
}

// --- steps ---------------------------------------------------------------------------------

PassReport train_step_2x(const Sample& sample, TrainState& state, const TrainConfig& config,
                         const LossContext& ctx, int patch_size) {
  const FrameSequence lr = seq::downsample(sample.degraded, 2, config.downsample_method);
  return run_pass(lr, sample.hr, patch_size, 1, state, config, ctx);
}

PassReport train_step_4x(const Sample& sample, TrainState& state, const TrainConfig& config,
                         const LossContext& ctx) {
  const FrameSequence lr = seq::downsample(sample.degraded, 4, config.downsample_method);
  return run_pass(lr, sample.hr, config.patch_size, 2, state, config, ctx);
}

PassReport leaf_step(const Sample& sample, TrainState& state, const TrainConfig& config,
                     const LossContext& ctx, int level) {
  return train_step_2x(sample, state, config, ctx, config.patch_size << level);
}

CropReport train_on_crop(const Sample& sample, TrainState& state, const TrainConfig& config,
                         const LossContext& ctx) {
  if (sample.hr.tensor().shape() != sample.degraded.tensor().shape()) {
    throw ShapeError("degraded crop must match the HR crop shape");
  }
  if (sample.hr.height() != config.crop_size || sample.hr.width() != config.crop_size) {
    throw ShapeError("crop must be " + std::to_string(config.crop_size) + "x" + std::to_string(config.crop_size));
  }
  const auto gen_params = state.generator->parameters();
  nn::zero_grads(gen_params);
  state.gen_pool.zero();
  const bool adv = adversarial_active(state, *checked(ctx).losses);
  nn::ParamList disc_params;
  if (state.discriminator) {
    disc_params = state.discriminator->parameters();
    nn::zero_grads(disc_params);
    state.disc_pool.zero();
  }

  CropReport report;
  BundleSums sums;
  for (int level = 0; level < config.leaf_scale_steps; ++level) {
    report.passes.push_back(leaf_step(sample, state, config, ctx, level));
  }
  if (config.enable_4x) report.passes.push_back(train_step_4x(sample, state, config, ctx));
  for (const auto& p : report.passes) sums.merge(p.mean, p.term_counts, p.contributions);
  report.mean = sums.mean();

  report.gen_contributions = state.gen_pool.contributions();
  if (report.gen_contributions > 0) {
    state.gen_pool.finalize();
    report.gen_grad_norm = state.gen_pool.clip(config.clip_norm);
    state.gen_optimizer.step(gen_params, state.gen_pool);
    ++state.gen_updates;
  }
  if (adv) {
    report.disc_contributions = state.disc_pool.contributions();
    if (report.disc_contributions > 0) {
      state.disc_pool.finalize();
      report.disc_grad_norm = state.disc_pool.clip(config.clip_norm);
      state.disc_optimizer.step(disc_params, state.disc_pool);
      ++state.disc_updates;
      report.disc_updated = true;
    }
  }
  ++state.crops_trained;
  return report;
}

// --- dataset -----------------------------------------------------------------------------------

int ClipSource::length() const { return frames ? frames->length() : io::count_frames(dir); }

FrameSequence ClipSource::window(int first, int count) const {
  if (frames) return FrameSequence(frames->tensor().frames(first, count), frames->frame_rate_hint());
  return io::load_clip(dir, first, count);
}

Dataset Dataset::from_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " is not a directory");
  Dataset ds;
  std::vector<std::string> names;
  const fs::path listing = root / "clips.txt";
  if (fs::exists(listing)) {
    std::ifstream in(listing);
    std::string line;
    while (std::getline(in, line)) {
      line.erase(0, line.find_first_not_of(" \t\r"));
      line.erase(line.find_last_not_of(" \t\r") + 1);
      if (!line.empty() && line[0] != '#') names.push_back(line);
    }
  } else {
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
  }
  for (const auto& n : names) {
    if (!fs::is_directory(root / n)) throw IoError("clip directory " + (root / n).string() + " not found");
    ds.clips.push_back({n, root / n, std::nullopt});
  }
  return ds;
}

nlohmann::json EpochSummary::to_json() const {
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& r : records) {
    clips.push_back({{"clip_id", r.clip_id},
                     {"crop_index", r.crop_index},
                     {"first_frame", r.first_frame},
                     {"origin", {r.origin.row, r.origin.col}},
                     {"augmentation",
                      {{"rotation_quarter_turns", r.augmentation.rotation_quarter_turns},
                       {"flip_vertical", r.augmentation.flip_vertical},
                       {"flip_horizontal", r.augmentation.flip_horizontal},
                       {"seed", r.augmentation.seed}}},
                     {"degradation", r.degradation},
                     {"skipped_dark", r.skipped_dark},
                     {"loss_total", r.loss_total}});
  }
  return {{"epoch", epoch},
          {"loss", mean.to_json()},
          {"crops_trained", crops_trained},
          {"crops_skipped", crops_skipped},
          {"clips", clips},
          {"warnings", warnings}};
}

EpochSummary train_epoch(const Dataset& dataset, TrainState& state, const TrainConfig& config,
                         const LossContext& ctx, const degrade::DegradationPlan& plan) {
  config.validate();
  if (dataset.clips.empty()) throw ConfigError("training dataset is empty");
  EpochSummary summary;
  const auto epoch_index = static_cast<std::uint64_t>(state.epochs_done);
  summary.epoch = state.epochs_done + 1;
  BundleSums sums;
  for (const auto& clip : dataset.clips) {
    const int len = clip.length();
    if (len < config.seq_len) {
      throw ConfigError("clip " + clip.id + " has " + std::to_string(len) + " frames, seq_len is " +
                        std::to_string(config.seq_len));
    }
    for (int c = 0; c < config.crops_per_clip; ++c) {
      std::uint64_t seed = derive_seed(config.seed, clip.id, epoch_index);
      if (c > 0) seed = derive_seed(seed, static_cast<std::uint64_t>(c));
      Rng rng(seed);

      ClipRecord rec;
      rec.clip_id = clip.id;
      rec.crop_index = c;
      rec.first_frame = uniform_int(rng, 0, len - config.seq_len);
      const FrameSequence frames = clip.window(rec.first_frame, config.seq_len);
      if (frames.height() < config.crop_size || frames.width() < config.crop_size) {
        throw ConfigError("clip " + clip.id + " frames are smaller than crop_size");
      }
      rec.origin = seq::random_crop_origin(frames, config.crop_size, rng);
      FrameSequence hr = seq::crop_fixed(frames, config.crop_size, rec.origin);
      if (config.augment) {
        rec.augmentation = seq::AugmentationSpec::sample(static_cast<unsigned>(rng() >> 32));
        hr = seq::augment(hr, rec.augmentation);
      }
      degrade::DegradationPlan item_plan = plan;
      item_plan.seed = derive_seed(plan.seed, seed);
      auto degraded = degrade::apply_plan(hr, item_plan);
      rec.degradation = degrade::to_json(degraded.log);

      const FrameSequence lr = seq::downsample(degraded.output, 2, config.downsample_method);
      if (seq::is_too_dark(lr, config.dark)) {
        rec.skipped_dark = true;
        ++summary.crops_skipped;
        summary.records.push_back(std::move(rec));
        continue;
      }
      const auto report = train_on_crop({hr, degraded.output}, state, config, ctx);
      rec.loss_total = report.mean.total;
      sums.add(report.mean);
      ++summary.crops_trained;
      summary.records.push_back(std::move(rec));
    }
  }
  if (summary.crops_trained == 0) summary.warnings.push_back("no usable crops: every crop was filtered as too dark");
  summary.mean = sums.mean();
  ++state.epochs_done;
  return summary;
}

// --- checkpoints ---------------------------------------------------------------------------------

void save_training_checkpoint(const std::filesystem::path& file, const TrainState& state, const TrainConfig& config) {
  ckpt::Archive a;
  a.meta["kind"] = "training";
  a.meta["generator"] = state.generator->spec().to_json();
  a.meta["discriminator"] = state.discriminator ? state.discriminator->spec().to_json() : nlohmann::json();
  a.meta["train"] = config.to_json();
  a.meta["counters"] = {{"gen_updates", state.gen_updates},
                        {"disc_updates", state.disc_updates},
                        {"crops_trained", state.crops_trained},
                        {"epochs_done", state.epochs_done},
                        {"generator_calls", state.generator_calls}};
  a.meta["rng"] = rng_state(state.rng);
  const auto gp = state.generator->parameters();
  ckpt::append(a, gp, "gen.");
  state.gen_optimizer.append_state(a, gp, "opt.gen.");
  if (state.discriminator) {
    const auto dp = state.discriminator->parameters();
    ckpt::append(a, dp, "disc.");
    state.disc_optimizer.append_state(a, dp, "opt.disc.");
  }
  ckpt::save(file, a, config.mixed_precision ? ckpt::DType::f16 : ckpt::DType::f32);
}

TrainState load_training_checkpoint(const std::filesystem::path& file, const TrainConfig& config) {
  const auto a = ckpt::load(file);
  if (a.meta.value("kind", "") != "training") throw ConsistencyError(file.string() + " is not a training checkpoint");
  const auto gspec = gen::GeneratorSpec::from_json(a.meta.at("generator"));
  std::optional<disc::DiscriminatorSpec> dspec;
  if (!a.meta.at("discriminator").is_null()) dspec = disc::DiscriminatorSpec::from_json(a.meta.at("discriminator"));
  TrainState s = TrainState::create(gspec, dspec, config);
  const auto gp = s.generator->parameters();
  ckpt::restore(a, gp, "gen.");
  s.gen_optimizer.restore_state(a, gp, "opt.gen.");
  if (s.discriminator) {
    const auto dp = s.discriminator->parameters();
    ckpt::restore(a, dp, "disc.");
    s.disc_optimizer.restore_state(a, dp, "opt.disc.");
  }
  try {
    const auto& c = a.meta.at("counters");
    s.gen_updates = c.at("gen_updates").get<std::int64_t>();
    s.disc_updates = c.at("disc_updates").get<std::int64_t>();
    s.crops_trained = c.at("crops_trained").get<std::int64_t>();
    s.epochs_done = c.at("epochs_done").get<std::int64_t>();
    s.generator_calls = c.at("generator_calls").get<std::int64_t>();
    std::istringstream is(a.meta.at("rng").get<std::string>());
    is >> s.rng;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError(std::string("training checkpoint counters: ") + e.what());
  }
  return s;
}

void save_generator(const std::filesystem::path& file, const gen::Generator& g, bool half_precision) {
  ckpt::Archive a;
  a.meta["kind"] = "generator";
  a.meta["generator"] = g.spec().to_json();
  ckpt::append(a, g.parameters(), "gen.");
  ckpt::save(file, a, half_precision ? ckpt::DType::f16 : ckpt::DType::f32);
}

std::unique_ptr<gen::Generator> load_generator(const std::filesystem::path& file) {
  const auto a = ckpt::load(file);
  if (!a.meta.contains("generator")) throw ConsistencyError(file.string() + " holds no generator");
  auto g = std::make_unique<gen::Generator>(gen::GeneratorSpec::from_json(a.meta.at("generator")));
  ckpt::restore(a, g->parameters(), "gen.");
  return g;
}

}  // namespace vsrlab::train
