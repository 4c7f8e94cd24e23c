#pragma once

#include <cstdint>

namespace lrknn {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for (stream, index) under a master seed. Every derived stream in
// the library goes through here so runs are reproducible and can be executed
// in any order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(mix64(master) ^ (stream * 0xd6e8feb86659fd93ULL)) ^ index);
}

// Stream tags used with derive_seed.
namespace streams {
inline constexpr std::uint64_t kLlfRun = 1;
inline constexpr std::uint64_t kSweepCell = 2;
inline constexpr std::uint64_t kFitEval = 3;
inline constexpr std::uint64_t kGaOperators = 4;
inline constexpr std::uint64_t kTrialObserved = 5;
inline constexpr std::uint64_t kTrialFit = 6;
inline constexpr std::uint64_t kKSweep = 7;
inline constexpr std::uint64_t kGridCell = 8;
}  // namespace streams

}  // namespace lrknn
