#include "spmu/unlearn/deletion.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_set>

#include "spmu/numeric/errors.hpp"

namespace spmu {

InstanceSet delete_instances(const InstanceSet& set, std::span<const std::size_t> forget) {
  const std::unordered_set<std::size_t> gone(forget.begin(), forget.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (!gone.contains(set.source_ids[i])) keep.push_back(i);
  if (keep.empty()) throw EmptySetError("delete: no inputted-set row survives");
  InstanceSet out;
  out.embeddings = set.embeddings.gather_rows(keep);
  out.labels = set.labels.gather_rows(keep);
  out.source_ids.reserve(keep.size());
  for (std::size_t i : keep) out.source_ids.push_back(set.source_ids[i]);
  return out;
}

ReducedSet delete_instances(const ReducedSet& set, std::span<const std::size_t> forget) {
  InstanceSet members = delete_instances(set.members, forget);
  switch (set.mode) {
    case Reduction::clustering:
      return cluster_instances(members);
    case Reduction::retrieval: {
      ReducedSet out;
      out.mode = Reduction::retrieval;
      out.k = std::min(set.k, members.size());
      out.members = std::move(members);
      return out;
    }
    case Reduction::full: {
      ReducedSet out;
      out.mode = Reduction::full;
      out.rows = members;
      out.members = std::move(members);
      return out;
    }
  }
  throw DomainError("delete: unknown reduction mode");
}

UnlearnResult<SpmPredictor> test_time_delete(const SpmPredictor& predictor, std::span<const std::size_t> forget) {
  const auto start = std::chrono::steady_clock::now();
  SpmPredictor out = predictor.with_members(delete_instances(predictor.members(), forget));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {"deletion", seconds, std::move(out)};
}

LabeledDataset retain_set(const LabeledDataset& train, std::span<const std::size_t> forget) {
  const auto keep = complement(train.size(), forget);
  if (keep.empty()) throw DomainError("retain set is empty");
  return subset(train, keep);
}

UnlearnResult<SpmPredictor> retrain_oracle(const SpmConfig& config, const LabeledDataset& train,
                                           std::span<const std::size_t> forget, std::uint64_t seed,
                                           Reduction mode, std::size_t k) {
  const auto start = std::chrono::steady_clock::now();
  const LabeledDataset retain = retain_set(train, forget);
  const SpmClassifier model = fit(config, retain, seed);
  // Source ids stay in the original row numbering so sets remain comparable.
  std::vector<std::size_t> ids = complement(train.size(), forget);
  InstanceSet members = encode_set(model, retain.x, one_hot(retain.y, config.num_classes), std::move(ids));
  SpmPredictor predictor(model, std::move(members), mode, std::min(k, retain.size()));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {"oracle", seconds, std::move(predictor)};
}

}  // namespace spmu
