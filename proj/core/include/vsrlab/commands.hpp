#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "vsrlab/config.hpp"

// The four workflows behind the vsrlab tool. Exit codes: 0 success,
// 1 runtime failure, 2 configuration or usage error.
namespace vsrlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct Invocation {
  std::string command;  // degrade | train | upscale | evaluate
  std::filesystem::path config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

// --out, then $VSRLAB_OUT, then [run] out.
std::filesystem::path resolve_output_dir(const config::RunConfig& cfg, const std::optional<std::string>& cli_out);

int run(const Invocation& inv, std::ostream& out, std::ostream& err);

// Individual commands on an already resolved configuration; they throw on
// failure and write manifest.json into `out_dir` on success.
void cmd_degrade(const config::RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
void cmd_train(const config::RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
void cmd_upscale(const config::RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
void cmd_evaluate(const config::RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace vsrlab::cli
