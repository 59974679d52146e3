#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "spmu/data/dataset.hpp"
#include "spmu/spm/classifier.hpp"
#include "spmu/spm/reduce.hpp"

namespace spmu {

/// Outcome of one unlearning method: its tag, wall time and the predictor it left behind.
template <class Predictor>
struct UnlearnResult {
  std::string method;
  double seconds = 0.0;
  Predictor predictor;
};

/// Rows whose source id is in `forget` removed. Throws EmptySetError if nothing survives.
InstanceSet delete_instances(const InstanceSet& set, std::span<const std::size_t> forget);

/// Deletion from the member pool; clustering rows are rebuilt from the
/// surviving members, so fully deleted classes disappear.
ReducedSet delete_instances(const ReducedSet& set, std::span<const std::size_t> forget);

/// Same weights, surviving members.
UnlearnResult<SpmPredictor> test_time_delete(const SpmPredictor& predictor, std::span<const std::size_t> forget);

/// Fits a fresh model on the rows of `train` not in `forget` with the same
/// config and seed, and serves it over those rows.
UnlearnResult<SpmPredictor> retrain_oracle(const SpmConfig& config, const LabeledDataset& train,
                                           std::span<const std::size_t> forget, std::uint64_t seed,
                                           Reduction mode = Reduction::full, std::size_t k = 0);

/// Rows of train outside forget; throws DomainError if it is empty.
LabeledDataset retain_set(const LabeledDataset& train, std::span<const std::size_t> forget);

}  // namespace spmu
