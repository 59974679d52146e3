#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "spmu/numeric/rng.hpp"

namespace spmu {

// Scaled down from the 1,024 / 256 inputted-set sizes used at full scale.
inline constexpr std::size_t kClassifierSetSize = 128;
inline constexpr std::size_t kGenerativeSetSize = 64;

/// m distinct indices from [0, n), uniform without replacement, never `exclude`.
std::vector<std::size_t> sample_inputted_set(std::size_t n, std::size_t m,
                                             std::optional<std::size_t> exclude, Rng& rng);
std::vector<std::size_t> sample_inputted_set(std::size_t n, std::size_t m,
                                             std::optional<std::size_t> exclude, std::uint64_t seed);

}  // namespace spmu
