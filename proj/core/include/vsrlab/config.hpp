#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsrlab/degrade.hpp"
#include "vsrlab/disc.hpp"
#include "vsrlab/eval.hpp"
#include "vsrlab/gen.hpp"
#include "vsrlab/loss.hpp"
#include "vsrlab/train.hpp"

// INI-style run configuration. Every key has a default; unknown sections or
// keys are rejected. serialize() writes every field, so
// parse(serialize(parse(text))) == parse(text).
namespace vsrlab::config {

enum class PlanMode { default_plan, none, custom };

struct RunConfig {
  // [run]
  std::uint64_t seed = 0;
  std::string out = "vsrlab_out";
  // [dataset]
  std::string dataset_root;
  // [degrade]
  PlanMode plan_mode = PlanMode::default_plan;
  std::vector<degrade::OperatorConfig> custom_steps;
  // [generator]
  gen::GeneratorSpec generator = gen::GeneratorSpec::defaults(gen::Variant::rrdb_based);
  // [discriminator]
  bool discriminator_enabled = true;
  disc::DiscriminatorSpec discriminator;
  // [loss]
  loss::LossConfig loss = loss::LossConfig::defaults();
  std::string extractor_weights;  // empty: seeded extractor, LPIPS reported as n/a
  std::uint64_t extractor_seed = 0;
  // [train]
  train::TrainConfig train;
  std::string resume;
  // [eval]
  std::vector<std::string> eval_models{"builtin:bicubic", "builtin:bilinear"};
  eval::EvalOptions eval;
  // [upscale]
  std::string upscale_input;
  std::string upscale_checkpoint;
  int upscale_scale = 2;

  // Plan actually used, seeded from `seed`.
  [[nodiscard]] degrade::DegradationPlan plan() const;
  void validate() const;  // ConfigError
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse(const std::string& text);  // ConfigError
RunConfig load(const std::filesystem::path& file);
std::string serialize(const RunConfig& config);
nlohmann::json to_json(const RunConfig& config);

// "gaussian_blur p=0.5 sigma=0.2..2" <-> OperatorConfig. Parameters left out
// keep their defaults.
degrade::OperatorConfig parse_step(const std::string& text);
std::string format_step(const degrade::OperatorConfig& step);

}  // namespace vsrlab::config
