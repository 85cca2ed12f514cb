#include "vsrlab/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>

#include "vsrlab/errors.hpp"
#include "vsrlab/frame_io.hpp"

namespace vsrlab::cli {
namespace fs = std::filesystem;
namespace {

// Problems found before any data is touched; reported with exit code 2.
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is not set");
  if (!fs::is_directory(path)) throw UsageError(std::string(what) + " '" + path + "' is not a directory");
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is not set");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " '" + path + "' does not exist");
}

nlohmann::json manifest_base(const std::string& command, const config::RunConfig& cfg) {
  return {{"command", command},
          {"seed", cfg.seed},
          {"config", config::to_json(cfg)},
          {"config_ini", config::serialize(cfg)}};
}

void write_json(const fs::path& file, const nlohmann::json& j) {
  std::ofstream os(file);
  if (!os) throw IoError("cannot write " + file.string());
  os << j.dump(2) << "\n";
  if (!os) throw IoError("failed writing " + file.string());
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoError("cannot write " + file.string());
  os << text;
  if (!os) throw IoError("failed writing " + file.string());
}

std::unique_ptr<loss::FeatureExtractor> make_extractor(const config::RunConfig& cfg) {
  if (cfg.extractor_weights.empty()) return std::make_unique<loss::ConvFeatureExtractor>(cfg.extractor_seed);
  require_file(cfg.extractor_weights, "[loss] extractor_weights");
  try {
    return std::make_unique<loss::ConvFeatureExtractor>(loss::ConvFeatureExtractor::load(cfg.extractor_weights));
  } catch (const DependencyError& e) {
    throw UsageError(e.what());
  }
}

std::string bundle_line(const loss::LossBundle& b) {
  std::string s = "total=" + std::to_string(b.total);
  for (const auto& [t, v] : b.values) s += " " + std::string(loss::to_string(t)) + "=" + std::to_string(v);
  return s;
}

}  // namespace

fs::path resolve_output_dir(const config::RunConfig& cfg, const std::optional<std::string>& cli_out) {
  if (cli_out && !cli_out->empty()) return *cli_out;
  if (const char* env = std::getenv("VSRLAB_OUT"); env && *env) return env;
  return cfg.out;
}

void cmd_degrade(const config::RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  require_dir(cfg.dataset_root, "[dataset] root");
  const auto dataset = train::Dataset::from_directory(cfg.dataset_root);
  if (dataset.clips.empty()) throw UsageError("dataset '" + cfg.dataset_root + "' has no clips");
  const auto plan = cfg.plan();
  fs::create_directories(out_dir);

  auto manifest = manifest_base("degrade", cfg);
  manifest["clips"] = nlohmann::json::array();
  for (const auto& clip : dataset.clips) {
    const auto hr = io::load_clip(clip.dir);
    auto clip_plan = plan;
    clip_plan.seed = derive_seed(plan.seed, clip.id, 0);
    const auto result = degrade::apply_plan(hr, clip_plan);
    io::save_clip(result.output, out_dir / clip.id);
    manifest["clips"].push_back({{"clip_id", clip.id},
                                 {"frames", hr.length()},
                                 {"seed", clip_plan.seed},
                                 {"steps", degrade::to_json(result.log)}});
    log << "degraded " << clip.id << " (" << hr.length() << " frames)\n";
  }
  write_json(out_dir / "manifest.json", manifest);
}

void cmd_train(const config::RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  require_dir(cfg.dataset_root, "[dataset] root");
  if (!cfg.resume.empty()) require_file(cfg.resume, "[train] resume");
  auto tc = cfg.train;
  tc.seed = cfg.seed;
  const auto dataset = train::Dataset::from_directory(cfg.dataset_root);
  if (dataset.clips.empty()) throw UsageError("dataset '" + cfg.dataset_root + "' has no clips");
  const auto extractor = make_extractor(cfg);

  train::TrainState state;
  if (!cfg.resume.empty()) {
    try {
      state = train::load_training_checkpoint(cfg.resume, tc);
    } catch (const ConsistencyError& e) {
      throw UsageError(e.what());
    }
  } else {
    std::optional<disc::DiscriminatorSpec> dspec;
    if (cfg.discriminator_enabled) dspec = cfg.discriminator;
    state = train::TrainState::create(cfg.generator, dspec, tc);
  }
  const train::LossContext ctx{&cfg.loss, extractor.get()};
  const auto plan = cfg.plan();
  fs::create_directories(out_dir);

  auto manifest = manifest_base("train", cfg);
  manifest["epochs"] = nlohmann::json::array();
  for (int e = 0; e < tc.epochs; ++e) {
    const auto summary = train::train_epoch(dataset, state, tc, ctx, plan);
    auto entry = summary.to_json();
    entry["gen_updates"] = state.gen_updates;
    entry["disc_updates"] = state.disc_updates;
    manifest["epochs"].push_back(entry);
    for (const auto& w : summary.warnings) log << "warning: " << w << "\n";
    log << "epoch " << summary.epoch << " crops=" << summary.crops_trained << " skipped=" << summary.crops_skipped
        << " step=" << state.gen_updates << " " << bundle_line(summary.mean) << "\n";
    if (tc.checkpoint_every > 0 && (e + 1) % tc.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "epoch_%06lld.ckpt", static_cast<long long>(state.epochs_done));
      train::save_training_checkpoint(out_dir / "checkpoints" / name, state, tc);
    }
  }
  train::save_training_checkpoint(out_dir / "checkpoint.ckpt", state, tc);
  train::save_generator(out_dir / "generator.ckpt", *state.generator, tc.mixed_precision);
  manifest["counters"] = {{"gen_updates", state.gen_updates},
                          {"disc_updates", state.disc_updates},
                          {"epochs_done", state.epochs_done}};
  manifest["outputs"] = {{"checkpoint", "checkpoint.ckpt"}, {"generator", "generator.ckpt"}};
  write_json(out_dir / "manifest.json", manifest);
}

void cmd_upscale(const config::RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  require_dir(cfg.upscale_input, "[upscale] input");
  if (cfg.upscale_checkpoint.rfind("builtin:", 0) != 0) require_file(cfg.upscale_checkpoint, "[upscale] checkpoint");
  eval::Model model;
  try {
    model = eval::resolve_model(cfg.upscale_checkpoint);
  } catch (const ConsistencyError& e) {
    throw UsageError(std::string("checkpoint does not match its generator spec: ") + e.what());
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  const auto lr = io::load_clip(cfg.upscale_input);
  const auto hr = model.upscale(lr, cfg.upscale_scale);
  fs::create_directories(out_dir);
  io::save_clip(hr, out_dir / "frames");
  auto manifest = manifest_base("upscale", cfg);
  manifest["input_frames"] = lr.length();
  manifest["input_size"] = {lr.height(), lr.width()};
  manifest["output_size"] = {hr.height(), hr.width()};
  manifest["outputs"] = {{"frames", "frames"}};
  write_json(out_dir / "manifest.json", manifest);
  log << "upscaled " << lr.length() << " frames " << lr.width() << "x" << lr.height() << " -> " << hr.width() << "x"
      << hr.height() << "\n";
}

void cmd_evaluate(const config::RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  require_dir(cfg.dataset_root, "[dataset] root");
  const auto dataset = train::Dataset::from_directory(cfg.dataset_root);
  if (dataset.clips.empty()) throw UsageError("dataset '" + cfg.dataset_root + "' has no clips");
  std::vector<eval::Model> models;
  for (const auto& m : cfg.eval_models) {
    if (m.rfind("builtin:", 0) != 0) require_file(m, "[eval] model");
    try {
      models.push_back(eval::resolve_model(m));
    } catch (const ConsistencyError& e) {
      throw UsageError(e.what());
    }
  }
  std::unique_ptr<loss::FeatureExtractor> extractor;
  if (!cfg.extractor_weights.empty()) extractor = make_extractor(cfg);

  const auto report = eval::compare_models(models, dataset, cfg.eval, extractor.get());
  fs::create_directories(out_dir);
  write_text(out_dir / "report.csv", report.to_csv());
  write_json(out_dir / "report.json", {{"aggregates", report.aggregates_json()}, {"rows", report.rows.size()}});
  auto manifest = manifest_base("evaluate", cfg);
  manifest["outputs"] = {{"csv", "report.csv"}, {"json", "report.json"}};
  manifest["aggregates"] = report.aggregates_json();
  write_json(out_dir / "manifest.json", manifest);
  log << report.format_table();
}

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg;
  fs::path out_dir;
  try {
    cfg = config::load(inv.config_file);
    if (inv.seed) cfg.seed = *inv.seed;
    out_dir = resolve_output_dir(cfg, inv.out);
  } catch (const Error& e) {
    err << "vsrlab " << inv.command << ": " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    if (inv.command == "degrade") {
      cmd_degrade(cfg, out_dir, out);
    } else if (inv.command == "train") {
      cmd_train(cfg, out_dir, out);
    } else if (inv.command == "upscale") {
      cmd_upscale(cfg, out_dir, out);
    } else if (inv.command == "evaluate") {
      cmd_evaluate(cfg, out_dir, out);
    } else {
      err << "vsrlab: unknown command '" << inv.command << "'\n";
      return kExitUsage;
    }
  } catch (const UsageError& e) {
    err << "vsrlab " << inv.command << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "vsrlab " << inv.command << ": " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace vsrlab::cli
