#pragma once

#include <cstdint>

// Substream ids of the model's random source.
namespace nggan::streams {

inline constexpr std::uint64_t kInitGenerator = 1;
inline constexpr std::uint64_t kInitCritic = 2;
inline constexpr std::uint64_t kHoldoutSplit = 3;
inline constexpr std::uint64_t kMonitorLatent = 4;
// Epoch e draws from substream kEpochBase + e.
inline constexpr std::uint64_t kEpochBase = 1000;

}  // namespace nggan::streams
