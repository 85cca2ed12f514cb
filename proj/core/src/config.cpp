#include "vsrlab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "vsrlab/errors.hpp"

namespace vsrlab::config {
namespace {

namespace pt = boost::property_tree;

std::string fmt_double(double v) {
  char buf[40];
  for (int prec : {15, 16, 17}) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + f(items[i]);
  return out;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("expected a number, got '" + s + "'");
}

long long to_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("expected an integer, got '" + s + "'");
}

std::uint64_t to_u64(const std::string& s) {
  try {
    std::size_t used = 0;
    if (!s.empty() && s[0] != '-') {
      const unsigned long long v = std::stoull(s, &used);
      if (used == s.size()) return v;
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("expected an unsigned integer, got '" + s + "'");
}

int to_int32(const std::string& s) {
  const long long v = to_int(s);
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError("integer out of range: " + s);
  return static_cast<int>(v);
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected a boolean, got '" + s + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define VSR_FIELD(sec, key, setter, getter) \
  Field { sec, key, [](RunConfig& c, const std::string& v) { setter; }, [](const RunConfig& c) { return getter; } }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f = {
        VSR_FIELD("run", "seed", c.seed = to_u64(v), std::to_string(c.seed)),
        VSR_FIELD("run", "out", c.out = v, c.out),
        VSR_FIELD("dataset", "root", c.dataset_root = v, c.dataset_root),
        VSR_FIELD("degrade", "plan",
                  c.plan_mode = v == "default" ? PlanMode::default_plan
                                : v == "none"  ? PlanMode::none
                                : v == "custom"
                                    ? PlanMode::custom
                                    : throw ConfigError("degrade plan must be default, none or custom"),
                  std::string(c.plan_mode == PlanMode::default_plan ? "default"
                              : c.plan_mode == PlanMode::none       ? "none"
                                                                    : "custom")),
        VSR_FIELD("generator", "variant", c.generator.variant = gen::parse_variant(v),
                  std::string(gen::to_string(c.generator.variant))),
        VSR_FIELD("generator", "base_channels", c.generator.base_channels = to_int32(v),
                  std::to_string(c.generator.base_channels)),
        VSR_FIELD("generator", "num_blocks", c.generator.num_blocks = to_int32(v),
                  std::to_string(c.generator.num_blocks)),
        VSR_FIELD("generator", "nonlocal_positions",
                  {
                    c.generator.nonlocal_positions.clear();
                    if (v != "none")
                      for (const auto& p : split(v, ',')) c.generator.nonlocal_positions.push_back(to_int32(p));
                  },
                  c.generator.nonlocal_positions.empty()
                      ? std::string("none")
                      : join<int>(c.generator.nonlocal_positions, [](const int& i) { return std::to_string(i); })),
        VSR_FIELD("generator", "pairwise", c.generator.pairwise = gen::parse_affinity(v),
                  std::string(gen::to_string(c.generator.pairwise))),
        VSR_FIELD("generator", "input_skip", c.generator.input_skip = gen::parse_input_skip(v),
                  std::string(gen::to_string(c.generator.input_skip))),
        VSR_FIELD("discriminator", "enabled", c.discriminator_enabled = to_bool(v), fmt_bool(c.discriminator_enabled)),
        VSR_FIELD("discriminator", "base_channels", c.discriminator.base_channels = to_int32(v),
                  std::to_string(c.discriminator.base_channels)),
        VSR_FIELD("discriminator", "depth", c.discriminator.depth = to_int32(v), std::to_string(c.discriminator.depth)),
        VSR_FIELD("loss", "charbonnier_epsilon", c.loss.charbonnier_epsilon = to_double(v),
                  fmt_double(c.loss.charbonnier_epsilon)),
        VSR_FIELD("loss", "pyramid_levels", c.loss.pyramid_levels = to_int32(v), std::to_string(c.loss.pyramid_levels)),
        VSR_FIELD("loss", "perceptual_norm",
                  c.loss.perceptual_norm = v == "l1"   ? loss::Norm::l1
                                           : v == "l2" ? loss::Norm::l2
                                                       : throw ConfigError("perceptual_norm must be l1 or l2"),
                  std::string(c.loss.perceptual_norm == loss::Norm::l1 ? "l1" : "l2")),
        VSR_FIELD("loss", "laplacian_kernel",
                  c.loss.laplacian_kernel = v == "k1"   ? loss::LaplacianKernel::k1
                                            : v == "k2" ? loss::LaplacianKernel::k2
                                                        : throw ConfigError("laplacian_kernel must be k1 or k2"),
                  std::string(c.loss.laplacian_kernel == loss::LaplacianKernel::k1 ? "k1" : "k2")),
        VSR_FIELD("loss", "extractor_weights", c.extractor_weights = v, c.extractor_weights),
        VSR_FIELD("loss", "extractor_seed", c.extractor_seed = to_u64(v), std::to_string(c.extractor_seed)),
        VSR_FIELD("train", "optimizer",
                  c.train.optimizer.kind = v == "adam"  ? train::OptimizerKind::adam
                                           : v == "sgd" ? train::OptimizerKind::sgd
                                                        : throw ConfigError("optimizer must be adam or sgd"),
                  std::string(c.train.optimizer.kind == train::OptimizerKind::adam ? "adam" : "sgd")),
        VSR_FIELD("train", "learning_rate", c.train.optimizer.learning_rate = to_double(v),
                  fmt_double(c.train.optimizer.learning_rate)),
        VSR_FIELD("train", "beta1", c.train.optimizer.beta1 = to_double(v), fmt_double(c.train.optimizer.beta1)),
        VSR_FIELD("train", "beta2", c.train.optimizer.beta2 = to_double(v), fmt_double(c.train.optimizer.beta2)),
        VSR_FIELD("train", "epsilon", c.train.optimizer.epsilon = to_double(v), fmt_double(c.train.optimizer.epsilon)),
        VSR_FIELD("train", "disc_learning_rate", c.train.disc_learning_rate = to_double(v),
                  fmt_double(c.train.disc_learning_rate)),
        VSR_FIELD("train", "clip_norm", c.train.clip_norm = to_double(v), fmt_double(c.train.clip_norm)),
        VSR_FIELD("train", "patch_size", c.train.patch_size = to_int32(v), std::to_string(c.train.patch_size)),
        VSR_FIELD("train", "leaf_scale_steps", c.train.leaf_scale_steps = to_int32(v),
                  std::to_string(c.train.leaf_scale_steps)),
        VSR_FIELD("train", "enable_4x", c.train.enable_4x = to_bool(v), fmt_bool(c.train.enable_4x)),
        VSR_FIELD("train", "crop_size", c.train.crop_size = to_int32(v), std::to_string(c.train.crop_size)),
        VSR_FIELD("train", "seq_len", c.train.seq_len = to_int32(v), std::to_string(c.train.seq_len)),
        VSR_FIELD("train", "epochs", c.train.epochs = to_int32(v), std::to_string(c.train.epochs)),
        VSR_FIELD("train", "crops_per_clip", c.train.crops_per_clip = to_int32(v),
                  std::to_string(c.train.crops_per_clip)),
        VSR_FIELD("train", "augment", c.train.augment = to_bool(v), fmt_bool(c.train.augment)),
        VSR_FIELD("train", "dark_threshold", c.train.dark.threshold = to_double(v), fmt_double(c.train.dark.threshold)),
        VSR_FIELD("train", "dark_check_borders", c.train.dark.check_borders = to_bool(v),
                  fmt_bool(c.train.dark.check_borders)),
        VSR_FIELD("train", "dark_border_width", c.train.dark.border_width = to_int32(v),
                  std::to_string(c.train.dark.border_width)),
        VSR_FIELD("train", "downsample", c.train.downsample_method = eval::parse_interpolation(v),
                  std::string(eval::to_string(c.train.downsample_method))),
        VSR_FIELD("train", "patch_order",
                  c.train.patch_order = v == "sequential" ? train::PatchOrder::sequential
                                        : v == "random"   ? train::PatchOrder::random
                                                          : throw ConfigError("patch_order must be sequential or random"),
                  std::string(c.train.patch_order == train::PatchOrder::sequential ? "sequential" : "random")),
        VSR_FIELD("train", "patch_stride", c.train.patch_stride = to_int32(v), std::to_string(c.train.patch_stride)),
        VSR_FIELD("train", "mixed_precision", c.train.mixed_precision = to_bool(v), fmt_bool(c.train.mixed_precision)),
        VSR_FIELD("train", "checkpoint_every", c.train.checkpoint_every = to_int32(v),
                  std::to_string(c.train.checkpoint_every)),
        VSR_FIELD("train", "resume", c.resume = v, c.resume),
        VSR_FIELD("eval", "models", c.eval_models = split(v, ','),
                  join<std::string>(c.eval_models, [](const std::string& s) { return s; })),
        VSR_FIELD("eval", "scales",
                  {
                    c.eval.scales.clear();
                    for (const auto& s : split(v, ',')) c.eval.scales.push_back(to_int32(s));
                  },
                  join<int>(c.eval.scales, [](const int& i) { return std::to_string(i); })),
        VSR_FIELD("eval", "methods",
                  {
                    c.eval.methods.clear();
                    for (const auto& s : split(v, ',')) c.eval.methods.push_back(eval::parse_interpolation(s));
                  },
                  join<Interpolation>(c.eval.methods,
                                      [](const Interpolation& m) { return std::string(eval::to_string(m)); })),
        VSR_FIELD("eval", "max_frames", c.eval.max_frames = to_int32(v), std::to_string(c.eval.max_frames)),
        VSR_FIELD("upscale", "input", c.upscale_input = v, c.upscale_input),
        VSR_FIELD("upscale", "checkpoint", c.upscale_checkpoint = v, c.upscale_checkpoint),
        VSR_FIELD("upscale", "scale", c.upscale_scale = to_int32(v), std::to_string(c.upscale_scale)),
    };
    for (loss::Term t : loss::all_terms()) {
      const std::string name(loss::to_string(t));
      f.push_back({"loss", "weight." + name, [t](RunConfig& c, const std::string& v) { c.loss.weights[t] = to_double(v); },
                   [t](const RunConfig& c) { return fmt_double(c.loss.weight(t)); }});
    }
    return f;
  }();
  return table;
}

#undef VSR_FIELD

const std::vector<std::string>& section_order() {
  static const std::vector<std::string> s = {"run",  "dataset", "degrade", "generator", "discriminator",
                                             "loss", "train",   "eval",    "upscale"};
  return s;
}

std::string fmt_range(const degrade::ParamRange& r) {
  if (r.lo == r.hi) return fmt_double(r.lo);
  return fmt_double(r.lo) + ".." + fmt_double(r.hi);
}

}  // namespace

degrade::OperatorConfig parse_step(const std::string& text) {
  const auto parts = split(text, ' ');
  if (parts.empty()) throw ConfigError("empty degradation step");
  auto step = degrade::OperatorConfig::with_defaults(degrade::parse_operator_kind(parts[0]));
  const auto names = degrade::parameter_names(step.kind);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos) throw ConfigError("degradation step token '" + parts[i] + "' is not key=value");
    const std::string key = parts[i].substr(0, eq), value = parts[i].substr(eq + 1);
    if (key == "p") {
      step.apply_probability = to_double(value);
      continue;
    }
    if (std::find(names.begin(), names.end(), key) == names.end()) {
      throw ConfigError(std::string(degrade::to_string(step.kind)) + ": unknown parameter '" + key + "'");
    }
    const auto dots = value.find("..");
    if (dots == std::string::npos) {
      const double v = to_double(value);
      step.params[key] = {v, v};
    } else {
      step.params[key] = {to_double(value.substr(0, dots)), to_double(value.substr(dots + 2))};
    }
  }
  step.validate();
  return step;
}

std::string format_step(const degrade::OperatorConfig& step) {
  std::string out = std::string(degrade::to_string(step.kind)) + " p=" + fmt_double(step.apply_probability);
  for (const auto& name : degrade::parameter_names(step.kind)) {
    auto it = step.params.find(name);
    if (it != step.params.end()) out += " " + name + "=" + fmt_range(it->second);
  }
  return out;
}

degrade::DegradationPlan RunConfig::plan() const {
  degrade::DegradationPlan p;
  switch (plan_mode) {
    case PlanMode::default_plan: p = degrade::DegradationPlan::default_plan(); break;
    case PlanMode::none: break;
    case PlanMode::custom: p.steps = custom_steps; break;
  }
  p.seed = derive_seed(seed, 0x64656772ULL);
  return p;
}

void RunConfig::validate() const {
  generator.validate();
  if (discriminator_enabled) discriminator.validate();
  loss.validate();
  train.validate();
  if (plan_mode != PlanMode::custom && !custom_steps.empty()) {
    throw ConfigError("degrade step.N entries need plan = custom");
  }
  if (plan_mode == PlanMode::custom && custom_steps.empty()) throw ConfigError("plan = custom needs step.N entries");
  for (const auto& s : custom_steps) s.validate();
  if (loss.weight(loss::Term::adversarial) > 0.0 && !discriminator_enabled) {
    throw ConfigError("adversarial loss weight > 0 needs the discriminator enabled");
  }
  for (int s : eval.scales)
    if (s != 2 && s != 4) throw ConfigError("eval scales must be 2 or 4");
  if (eval.scales.empty() || eval.methods.empty()) throw ConfigError("eval needs at least one scale and method");
  if (eval_models.empty()) throw ConfigError("eval needs at least one model");
  if (eval.max_frames < 0) throw ConfigError("eval max_frames must be >= 0");
  if (upscale_scale != 2 && upscale_scale != 4) throw ConfigError("upscale scale must be 2 or 4");
  if (out.empty()) throw ConfigError("run out must not be empty");
}

RunConfig parse(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  std::vector<std::pair<int, degrade::OperatorConfig>> steps;
  for (const auto& [section, body] : tree) {
    if (std::find(section_order().begin(), section_order().end(), section) == section_order().end()) {
      throw ConfigError("config: unknown section [" + section + "]");
    }
    if (!body.data().empty()) throw ConfigError("config: key '" + section + "' outside any section");
    for (const auto& [key, node] : body) {
      const std::string value = trim(node.data());
      if (section == "degrade" && key.rfind("step.", 0) == 0) {
        const int index = to_int32(key.substr(5));
        for (const auto& s : steps)
          if (s.first == index) throw ConfigError("config: duplicate degrade " + key);
        try {
          steps.emplace_back(index, parse_step(value));
        } catch (const ConfigError& e) {
          throw ConfigError("config [degrade] " + key + ": " + e.what());
        }
        continue;
      }
      auto it = std::find_if(fields().begin(), fields().end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == fields().end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
      try {
        it->set(c, value);
      } catch (const ConfigError& e) {
        throw ConfigError("config [" + section + "] " + key + ": " + e.what());
      }
    }
  }
  std::sort(steps.begin(), steps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& s : steps) c.custom_steps.push_back(std::move(s.second));
  c.validate();
  return c;
}

RunConfig load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string serialize(const RunConfig& c) {
  std::string out;
  for (const auto& section : section_order()) {
    out += "[" + section + "]\n";
    for (const auto& f : fields())
      if (f.section == section) out += f.key + " = " + f.get(c) + "\n";
    if (section == "degrade") {
      for (std::size_t i = 0; i < c.custom_steps.size(); ++i) {
        out += "step." + std::to_string(i + 1) + " = " + format_step(c.custom_steps[i]) + "\n";
      }
    }
    out += "\n";
  }
  return out;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) j[f.section][f.key] = f.get(c);
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& s : c.plan().steps) plan.push_back(format_step(s));
  j["degrade"]["effective_steps"] = plan;
  return j;
}

}  // namespace vsrlab::config
