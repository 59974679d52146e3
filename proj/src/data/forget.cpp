#include "spmu/data/forget.hpp"

#include <algorithm>
#include <cmath>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/rng.hpp"

namespace spmu {

ForgetSpec ForgetSpec::by_classes(std::vector<std::size_t> classes) {
  ForgetSpec s;
  s.mode = Mode::classes;
  s.classes = std::move(classes);
  return s;
}

ForgetSpec ForgetSpec::by_indices(std::vector<std::size_t> indices) {
  ForgetSpec s;
  s.mode = Mode::indices;
  s.indices = std::move(indices);
  return s;
}

ForgetSpec ForgetSpec::random(double fraction, std::uint64_t seed) {
  ForgetSpec s;
  s.mode = Mode::random;
  s.fraction = fraction;
  s.seed = seed;
  return s;
}

void validate(const ForgetSpec& spec, const LabeledDataset& ds) {
  switch (spec.mode) {
    case ForgetSpec::Mode::classes:
      for (std::size_t c : spec.classes)
        if (c >= ds.num_classes) throw DomainError("forget: class id outside [0, C)");
      break;
    case ForgetSpec::Mode::indices:
      for (std::size_t i : spec.indices)
        if (i >= ds.size()) throw DomainError("forget: row index outside [0, N)");
      break;
    case ForgetSpec::Mode::random:
      if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) throw DomainError("forget: fraction must lie in (0, 1)");
      break;
  }
}

std::vector<std::size_t> resolve_forget(const LabeledDataset& ds, const ForgetSpec& spec) {
  validate(spec, ds);
  std::vector<std::size_t> out;
  switch (spec.mode) {
    case ForgetSpec::Mode::classes: {
      std::vector<bool> listed(ds.num_classes, false);
      for (std::size_t c : spec.classes) listed[c] = true;
      for (std::size_t i = 0; i < ds.size(); ++i)
        if (listed[ds.y[i]]) out.push_back(i);
      break;
    }
    case ForgetSpec::Mode::indices:
      out = spec.indices;
      break;
    case ForgetSpec::Mode::random: {
      const auto k = static_cast<std::size_t>(std::floor(spec.fraction * static_cast<double>(ds.size())));
      Rng rng(spec.seed);
      out = rng.sample_without_replacement(ds.size(), k);
      break;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw DomainError("forget: nothing to unlearn");
  if (out.size() >= ds.size()) throw DomainError("forget: retain set would be empty");
  return out;
}

}  // namespace spmu
