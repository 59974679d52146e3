#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spmu/data/dataset.hpp"
#include "spmu/numeric/mat.hpp"

namespace spmu {

inline constexpr std::size_t kDefaultKnnK = 15;

/// Exact-search index over raw feature rows.
struct KnnIndex {
  Mat x;
  std::vector<std::size_t> y;
  std::vector<std::size_t> source_ids;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return y.size(); }
};

/// Source ids are row indices of `ds`.
KnnIndex build_knn(const LabeledDataset& ds);
/// Index over the listed rows, keeping their row indices as source ids.
KnnIndex build_knn(const LabeledDataset& ds, std::span<const std::size_t> rows);

/// Uniform vote over the k nearest rows by L2; distance ties go to the lower source id.
std::vector<double> knn_predict(const KnnIndex& index, std::span<const double> x, std::size_t k = kDefaultKnnK);
Mat knn_predict_proba(const KnnIndex& index, const Mat& x, std::size_t k = kDefaultKnnK);

/// Index without the rows whose source id is in `forget`.
KnnIndex knn_delete(const KnnIndex& index, std::span<const std::size_t> forget);

}  // namespace spmu
