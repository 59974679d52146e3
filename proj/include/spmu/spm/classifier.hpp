#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spmu/data/dataset.hpp"
#include "spmu/numeric/layers.hpp"
#include "spmu/numeric/mat.hpp"

namespace spmu {

struct SpmConfig {
  std::size_t input_dim = 2;
  std::size_t num_classes = 2;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t embed_dim = 32;
  std::size_t attn_dim = 32;
  std::size_t set_size = 128;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double lr = 1e-3;
  bool label_perm = false;

  /// Throws DomainError on inconsistent widths or zero sizes.
  void validate() const;
};

/// Per-instance embeddings paired with one-hot labels and the training-row
/// index each came from.
struct InstanceSet {
  Mat embeddings;
  Mat labels;
  std::vector<std::size_t> source_ids;

  std::size_t size() const noexcept { return source_ids.size(); }
  void validate() const;
};

/// Classification SPM: backbone f gives the query latent, the shared encoder h
/// embeds set members, and the head mixes set labels with attention weights.
struct SpmClassifier {
  SpmConfig config;
  Mlp backbone;
  Mlp encoder;
  Mat w_query;  // embed_dim x attn_dim
  Mat w_key;    // embed_dim x attn_dim
  double train_accuracy = 0.0;

  std::vector<Mat*> parameters();
  std::vector<const Mat*> parameters() const;
};

SpmClassifier init_classifier(const SpmConfig& config, std::uint64_t seed);

/// Backbone latents f(x), one row per input row.
Mat latent(const SpmClassifier& model, const Mat& x);

InstanceSet encode_set(const SpmClassifier& model, const Mat& x_set, const Mat& y_set,
                       std::vector<std::size_t> source_ids);
/// Whole dataset; source ids are row indices.
InstanceSet encode_set(const SpmClassifier& model, const LabeledDataset& ds);

/// Softmax over set rows of (W_q z)^T (W_k s_i). The excluded source is
/// dropped before normalization and its row is never read; its weight is 0.
std::vector<double> attention(const SpmClassifier& model, std::span<const double> z,
                              const InstanceSet& set, std::optional<std::size_t> exclude = {});

/// Class probabilities sum_i alpha_i y_i for one input row.
std::vector<double> predict(const SpmClassifier& model, std::span<const double> x, const InstanceSet& set,
                            std::optional<std::size_t> exclude = {});

/// Batched predict without exclusion.
Mat predict_batch(const SpmClassifier& model, const Mat& x, const InstanceSet& set);

struct QueryBatch {
  Mat x;
  std::vector<std::size_t> targets;
  std::vector<std::optional<std::size_t>> source_ids;  // for self-exclusion
};

struct SetBatch {
  Mat x;
  Mat labels;  // one-hot
  std::vector<std::size_t> source_ids;
};

struct LossGrad {
  double value = 0.0;
  std::vector<Mat> grads;  // parameters() order
};

/// Mean cross-entropy of self-excluded predictions against targets.
double loss(const SpmClassifier& model, const QueryBatch& batch, const SetBatch& set);
LossGrad loss_and_grad(const SpmClassifier& model, const QueryBatch& batch, const SetBatch& set);

/// Minibatch Adam training; each batch gets a freshly sampled inputted set.
SpmClassifier fit(const SpmConfig& config, const LabeledDataset& train, std::uint64_t seed);

/// Leave-one-out accuracy with the whole training set as the inputted set.
double self_excluded_accuracy(const SpmClassifier& model, const LabeledDataset& train);

}  // namespace spmu
