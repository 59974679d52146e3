#include "spmu/unlearn/knn.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"

namespace spmu {

KnnIndex build_knn(const LabeledDataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return build_knn(ds, rows);
}

KnnIndex build_knn(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  ds.validate();
  KnnIndex index;
  index.x = ds.x.gather_rows(rows);
  index.num_classes = ds.num_classes;
  for (std::size_t r : rows) {
    index.y.push_back(ds.y[r]);
    index.source_ids.push_back(r);
  }
  return index;
}

std::vector<double> knn_predict(const KnnIndex& index, std::span<const double> x, std::size_t k) {
  if (k == 0) throw DomainError("knn_predict: k must be positive");
  if (k > index.size()) throw DomainError("knn_predict: k exceeds index size");
  if (x.size() != index.x.cols()) throw ShapeError("knn_predict: query width mismatch");
  std::vector<std::pair<double, std::size_t>> ranked(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) ranked[i] = {squared_distance(index.x.row(i), x), i};
  auto closer = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return index.source_ids[a.second] < index.source_ids[b.second];
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(), closer);
  std::vector<double> votes(index.num_classes, 0.0);
  for (std::size_t j = 0; j < k; ++j) votes[index.y[ranked[j].second]] += 1.0;
  for (double& v : votes) v /= static_cast<double>(k);
  return votes;
}

Mat knn_predict_proba(const KnnIndex& index, const Mat& x, std::size_t k) {
  Mat out(x.rows(), index.num_classes);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto p = knn_predict(index, x.row(r), k);
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

KnnIndex knn_delete(const KnnIndex& index, std::span<const std::size_t> forget) {
  const std::unordered_set<std::size_t> gone(forget.begin(), forget.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < index.size(); ++i)
    if (!gone.contains(index.source_ids[i])) keep.push_back(i);
  KnnIndex out;
  out.x = index.x.gather_rows(keep);
  out.num_classes = index.num_classes;
  for (std::size_t i : keep) {
    out.y.push_back(index.y[i]);
    out.source_ids.push_back(index.source_ids[i]);
  }
  return out;
}

}  // namespace spmu
