#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spmu/data/dataset.hpp"

namespace spmu {

/// Declarative description of the unlearn set.
struct ForgetSpec {
  enum class Mode { classes, indices, random };

  Mode mode = Mode::classes;
  std::vector<std::size_t> classes;
  std::vector<std::size_t> indices;
  double fraction = 0.0;
  std::uint64_t seed = 0;

  static ForgetSpec by_classes(std::vector<std::size_t> classes);
  static ForgetSpec by_indices(std::vector<std::size_t> indices);
  static ForgetSpec random(double fraction, std::uint64_t seed);
};

/// Throws DomainError if the spec does not fit the dataset.
void validate(const ForgetSpec& spec, const LabeledDataset& ds);

/// Sorted, distinct row indices to unlearn. Throws DomainError when the
/// result or the retained remainder would be empty.
std::vector<std::size_t> resolve_forget(const LabeledDataset& ds, const ForgetSpec& spec);

}  // namespace spmu
