#include "spmu/data/label_perm.hpp"

#include "spmu/numeric/errors.hpp"

namespace spmu {

LabelPermutation LabelPermutation::identity(std::size_t num_classes) {
  std::vector<std::size_t> map(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) map[i] = i;
  return LabelPermutation(std::move(map));
}

LabelPermutation LabelPermutation::random(std::size_t num_classes, Rng& rng) {
  auto p = identity(num_classes);
  rng.shuffle(std::span<std::size_t>(p.map_));
  return p;
}

LabelPermutation LabelPermutation::from_mapping(std::vector<std::size_t> mapping) {
  std::vector<bool> seen(mapping.size(), false);
  for (std::size_t v : mapping) {
    if (v >= mapping.size() || seen[v]) throw DomainError("LabelPermutation: mapping is not a bijection");
    seen[v] = true;
  }
  return LabelPermutation(std::move(mapping));
}

LabelPermutation LabelPermutation::inverse() const {
  std::vector<std::size_t> inv(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = i;
  return LabelPermutation(std::move(inv));
}

void check_one_hot(const Mat& rows) {
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    std::size_t ones = 0;
    for (double v : rows.row(i)) {
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw DomainError("label rows must be one-hot");
      }
    }
    if (ones != 1) throw DomainError("label rows must be one-hot");
  }
}

Mat apply_label_perm(const Mat& one_hot_rows, const LabelPermutation& pi) {
  if (one_hot_rows.cols() != pi.size()) throw ShapeError("apply_label_perm: class count mismatch");
  check_one_hot(one_hot_rows);
  Mat out(one_hot_rows.rows(), one_hot_rows.cols());
  for (std::size_t i = 0; i < one_hot_rows.rows(); ++i)
    for (std::size_t j = 0; j < one_hot_rows.cols(); ++j) out(i, pi(j)) = one_hot_rows(i, j);
  return out;
}

}  // namespace spmu
