#pragma once

#include <cstddef>
#include <vector>

#include "spmu/numeric/mat.hpp"
#include "spmu/numeric/rng.hpp"

namespace spmu {

/// Bijection on class indices [0, C).
class LabelPermutation {
 public:
  static LabelPermutation identity(std::size_t num_classes);
  static LabelPermutation random(std::size_t num_classes, Rng& rng);
  /// Throws DomainError unless `mapping` is a permutation.
  static LabelPermutation from_mapping(std::vector<std::size_t> mapping);

  std::size_t operator()(std::size_t c) const { return map_.at(c); }
  std::size_t size() const noexcept { return map_.size(); }
  LabelPermutation inverse() const;
  const std::vector<std::size_t>& mapping() const noexcept { return map_; }

 private:
  explicit LabelPermutation(std::vector<std::size_t> map) : map_(std::move(map)) {}
  std::vector<std::size_t> map_;
};

/// Moves column j of a one-hot batch to column pi(j).
Mat apply_label_perm(const Mat& one_hot_rows, const LabelPermutation& pi);

/// Throws DomainError if any row is not exactly one-hot.
void check_one_hot(const Mat& rows);

}  // namespace spmu
