#include <CLI11.hpp>

#include <iostream>
#include <utility>

#include "vsrlab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vsrlab: spatio-temporal video super-resolution lab"};
  app.require_subcommand(1);

  vsrlab::cli::Invocation inv;
  std::uint64_t seed = 0;
  std::string out;
  const std::pair<const char*, const char*> commands[] = {
      {"degrade", "write degraded copies of every clip under [dataset] root"},
      {"train", "train the generator (and discriminator) on [dataset] root"},
      {"upscale", "upscale the frames in [upscale] input with a checkpoint"},
      {"evaluate", "PSNR/SSIM/LPIPS report for [eval] models over [dataset] root"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config_file, "INI run configuration")->required();
    sub->add_option("--seed", seed, "global seed, overrides [run] seed");
    sub->add_option("--out", out, "output directory, overrides VSRLAB_OUT and [run] out");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vsrlab::cli::kExitUsage;
  }

  for (auto* sub : app.get_subcommands()) {
    inv.command = sub->get_name();
    if (sub->count("--seed")) inv.seed = seed;
    if (sub->count("--out")) inv.out = out;
  }
  return vsrlab::cli::run(inv, std::cout, std::cerr);
}
