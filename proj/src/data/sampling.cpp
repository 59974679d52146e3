#include "spmu/data/sampling.hpp"

#include "spmu/numeric/errors.hpp"

namespace spmu {

std::vector<std::size_t> sample_inputted_set(std::size_t n, std::size_t m,
                                             std::optional<std::size_t> exclude, Rng& rng) {
  const bool has_exclude = exclude.has_value() && *exclude < n;
  const std::size_t available = n - (has_exclude ? 1 : 0);
  if (m > available) throw DomainError("sample_inputted_set: requested size exceeds available rows");
  auto picks = rng.sample_without_replacement(available, m);
  if (has_exclude) {
    // Draw from [0, n-1) and shift indices at or past the excluded row.
    for (std::size_t& p : picks)
      if (p >= *exclude) ++p;
  }
  return picks;
}

std::vector<std::size_t> sample_inputted_set(std::size_t n, std::size_t m,
                                             std::optional<std::size_t> exclude, std::uint64_t seed) {
  Rng rng(seed);
  return sample_inputted_set(n, m, exclude, rng);
}

}  // namespace spmu
