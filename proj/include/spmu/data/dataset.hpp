#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spmu/numeric/mat.hpp"

namespace spmu {

/// N feature rows with class indices in [0, num_classes).
struct LabeledDataset {
  Mat x;
  std::vector<std::size_t> y;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dim() const noexcept { return x.cols(); }

  /// Throws DomainError/ShapeError when an invariant is broken.
  void validate() const;
};

LabeledDataset gen_blobs(std::size_t num_classes, std::size_t per_class, const Mat& centers,
                         double sigma, std::uint64_t seed);

/// Two interleaving half circles: class 0 on the upper unit half circle,
/// class 1 on the lower one shifted to (1, 0.5).
LabeledDataset gen_moons(std::size_t per_class, double noise, std::uint64_t seed);

/// Appends `count` isotropic Gaussian points around `center` with label `label`.
LabeledDataset append_cluster(const LabeledDataset& ds, std::span<const double> center, double sigma,
                              std::size_t count, std::size_t label, std::uint64_t seed);

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> indices);

/// Sorted indices of [0, n) not present in `removed`.
std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> removed);

std::vector<std::size_t> class_counts(const LabeledDataset& ds);

/// Rows e_{labels[i]} of width num_classes.
Mat one_hot(std::span<const std::size_t> labels, std::size_t num_classes);

struct Split {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
};

/// Stratified split; each class contributes round(p * n_c) test rows,
/// clamped so both sides keep at least one row of the class.
Split split(const LabeledDataset& ds, double test_fraction, std::uint64_t seed);

}  // namespace spmu
