#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vsrlab {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Stable per-item seed from (global seed, clip id, epoch); independent of
// iteration order, so a prefetching pipeline reproduces the serial stream.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view clip_id, std::uint64_t epoch);

// Mix an extra salt into an existing seed (per step, per frame, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

double uniform(Rng& rng, double lo, double hi);
int uniform_int(Rng& rng, int lo, int hi);  // inclusive
bool bernoulli(Rng& rng, double p);
// Standard normal via Box-Muller.
double normal(Rng& rng);

}  // namespace vsrlab
