#pragma once

#include <cstddef>
#include <span>

#include "spmu/data/dataset.hpp"
#include "spmu/spm/classifier.hpp"

namespace spmu {

enum class Reduction { full, retrieval, clustering };

/// An inputted set shrunk to constant size.
///  - clustering: one averaged row per class present in `members`; the row's
///    source id is the class id. `members` keeps the per-instance rows so
///    means can be recomputed after deletion.
///  - retrieval: the k members nearest to a query in embedding space.
struct ReducedSet {
  Reduction mode = Reduction::full;
  std::size_t k = 0;
  InstanceSet rows;
  InstanceSet members;
};

/// Per-class means of the member embeddings. Classes without members are skipped.
ReducedSet cluster_instances(const InstanceSet& members);
ReducedSet reduce_clustering(const SpmClassifier& model, const LabeledDataset& train);

/// k nearest members to `query_embedding` by L2, ties to the lower source id.
ReducedSet retrieve(const InstanceSet& members, std::span<const double> query_embedding, std::size_t k);
ReducedSet reduce_retrieval(const SpmClassifier& model, const LabeledDataset& train,
                            std::span<const double> x, std::size_t k);

/// Inputted-set bundle used for inference: a trained model plus the encoded
/// members and a reduction mode.
class SpmPredictor {
 public:
  SpmPredictor(const SpmClassifier& model, InstanceSet members, Reduction mode = Reduction::full,
               std::size_t k = 0);

  Mat predict_proba(const Mat& x) const;

  const SpmClassifier& model() const noexcept { return model_; }
  const InstanceSet& members() const noexcept { return members_; }
  Reduction mode() const noexcept { return mode_; }
  std::size_t k() const noexcept { return k_; }

  /// Same model and mode over a different member set.
  SpmPredictor with_members(InstanceSet members) const;

 private:
  SpmClassifier model_;
  InstanceSet members_;
  Reduction mode_;
  std::size_t k_;
  InstanceSet clustered_;
};

}  // namespace spmu
