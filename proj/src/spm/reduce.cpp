#include "spmu/spm/reduce.hpp"

#include <algorithm>
#include <numeric>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"

namespace spmu {

ReducedSet cluster_instances(const InstanceSet& members) {
  const std::size_t classes = members.labels.cols();
  const std::size_t dim = members.embeddings.cols();
  Mat sums(classes, dim);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const std::size_t c = argmax(members.labels.row(i));
    ++counts[c];
    auto dst = sums.row(c);
    const auto src = members.embeddings.row(i);
    for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
  }
  ReducedSet out;
  out.mode = Reduction::clustering;
  out.members = members;
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < classes; ++c)
    if (counts[c] > 0) present.push_back(c);
  out.rows.embeddings = Mat(present.size(), dim);
  out.rows.labels = Mat(present.size(), classes);
  for (std::size_t r = 0; r < present.size(); ++r) {
    const std::size_t c = present[r];
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (std::size_t d = 0; d < dim; ++d) out.rows.embeddings(r, d) = sums(c, d) * inv;
    out.rows.labels(r, c) = 1.0;
    out.rows.source_ids.push_back(c);
  }
  return out;
}

ReducedSet reduce_clustering(const SpmClassifier& model, const LabeledDataset& train) {
  return cluster_instances(encode_set(model, train));
}

ReducedSet retrieve(const InstanceSet& members, std::span<const double> query_embedding, std::size_t k) {
  if (k > members.size()) throw DomainError("retrieve: k exceeds set size");
  if (query_embedding.size() != members.embeddings.cols()) throw ShapeError("retrieve: embedding width mismatch");
  std::vector<std::pair<double, std::size_t>> ranked(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    ranked[i] = {squared_distance(members.embeddings.row(i), query_embedding), i};
  }
  auto closer = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return members.source_ids[a.second] < members.source_ids[b.second];
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(), closer);
  std::vector<std::size_t> rows(k);
  for (std::size_t j = 0; j < k; ++j) rows[j] = ranked[j].second;
  ReducedSet out;
  out.mode = Reduction::retrieval;
  out.k = k;
  out.rows.embeddings = members.embeddings.gather_rows(rows);
  out.rows.labels = members.labels.gather_rows(rows);
  for (std::size_t r : rows) out.rows.source_ids.push_back(members.source_ids[r]);
  return out;
}

ReducedSet reduce_retrieval(const SpmClassifier& model, const LabeledDataset& train,
                            std::span<const double> x, std::size_t k) {
  if (k > train.size()) throw DomainError("reduce_retrieval: k exceeds training set size");
  const Mat query = forward(model.encoder, Mat::row_vector(x));
  return retrieve(encode_set(model, train), query.row(0), k);
}

SpmPredictor::SpmPredictor(const SpmClassifier& model, InstanceSet members, Reduction mode, std::size_t k)
    : model_(model), members_(std::move(members)), mode_(mode), k_(k) {
  if (members_.size() == 0) throw EmptySetError("SpmPredictor: inputted set is empty");
  if (mode_ == Reduction::retrieval && (k_ == 0 || k_ > members_.size())) {
    throw DomainError("SpmPredictor: retrieval k must lie in [1, set size]");
  }
  if (mode_ == Reduction::clustering) clustered_ = cluster_instances(members_).rows;
}

SpmPredictor SpmPredictor::with_members(InstanceSet members) const {
  const std::size_t k = std::min(k_, members.size());
  return SpmPredictor(model_, std::move(members), mode_, k);
}

Mat SpmPredictor::predict_proba(const Mat& x) const {
  switch (mode_) {
    case Reduction::full:
      return predict_batch(model_, x, members_);
    case Reduction::clustering:
      return predict_batch(model_, x, clustered_);
    case Reduction::retrieval: {
      const Mat queries = forward(model_.encoder, x);
      Mat out(x.rows(), members_.labels.cols());
      for (std::size_t b = 0; b < x.rows(); ++b) {
        const ReducedSet near = retrieve(members_, queries.row(b), k_);
        const Mat p = predict_batch(model_, x.gather_rows(std::vector<std::size_t>{b}), near.rows);
        std::copy(p.row(0).begin(), p.row(0).end(), out.row(b).begin());
      }
      return out;
    }
  }
  throw DomainError("SpmPredictor: unknown reduction mode");
}

}  // namespace spmu
