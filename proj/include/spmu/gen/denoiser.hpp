#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spmu/data/dataset.hpp"
#include "spmu/gen/schedule.hpp"
#include "spmu/numeric/layers.hpp"
#include "spmu/numeric/mat.hpp"

namespace spmu {

struct GenConfig {
  std::size_t input_dim = 2;
  std::size_t num_classes = 3;
  std::vector<std::size_t> down_hidden = {64};
  std::vector<std::size_t> up_hidden = {64, 64};
  std::size_t width = 32;     // down output, fusion and up input width
  std::size_t time_dim = 16;  // sinusoidal features before projection
  std::size_t steps_t = 50;   // diffusion steps T
  std::size_t set_size = 64;
  std::size_t batch_size = 64;
  std::size_t train_steps = 2000;
  double lr = 2e-3;
  bool label_perm = true;

  void validate() const;
};

/// Inputted set for the generative model. One patch per element at this
/// scale, so each row of `embeddings` is s_j = down(x_j).
/// `serve[c]` is the class whose elements answer a query conditioned on c;
/// it is the identity until a class is substituted.
struct PatchSet {
  Mat embeddings;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> source_ids;
  std::vector<std::size_t> serve;

  std::size_t size() const noexcept { return labels.size(); }
  /// Row indices answering class c, minus `exclude` by source id.
  std::vector<std::size_t> rows_for(std::size_t c, std::optional<std::size_t> exclude = {}) const;
  void validate() const;
};

/// Class-conditioned noise predictor with a fusion mid-block:
///   z = down(x_t) + time(t) + class(c)
///   fused = sum_j alpha_j W_k s_j,  alpha = softmax_j w^T relu(W_q z + W_k s_j + b)
///   eps_hat = up(z + fused)
struct SpmDenoiser {
  GenConfig config;
  NoiseSchedule schedule;
  Mlp down;
  Mlp up;
  Mat time_table;   // T x time_dim, fixed sinusoidal rows
  Mat time_proj;    // time_dim x width
  Mat class_embed;  // num_classes x width
  Mat w_query;      // width x width
  Mat w_key;        // width x width
  Mat attn_bias;    // 1 x width
  Mat attn_w;       // width x 1

  std::vector<Mat*> parameters();
  std::vector<const Mat*> parameters() const;
};

SpmDenoiser init_denoiser(const GenConfig& config, std::uint64_t seed);

PatchSet encode_patches(const SpmDenoiser& model, const Mat& x, std::vector<std::size_t> labels,
                        std::vector<std::size_t> source_ids);
/// Whole dataset; source ids are row indices.
PatchSet encode_patches(const SpmDenoiser& model, const LabeledDataset& ds);

/// Attention weights of latent z over the rows of q_embeddings.
std::vector<double> fusion_weights(const SpmDenoiser& model, std::span<const double> z, const Mat& q_embeddings);

/// sum_j alpha_j W_k s_j over the rows of q_embeddings. Throws EmptySetError on an empty Q.
std::vector<double> fuse_patch(const SpmDenoiser& model, std::span<const double> z, const Mat& q_embeddings);

/// Pre-fusion latent for one noisy point.
std::vector<double> query_latent(const SpmDenoiser& model, std::span<const double> x_t, std::size_t t,
                                 std::size_t c);

/// Noise prediction for one point; `exclude` drops that source id from Q.
/// Throws ConditioningError when no element answers class c.
std::vector<double> denoise(const SpmDenoiser& model, std::span<const double> x_t, std::size_t t, std::size_t c,
                            const PatchSet& set, std::optional<std::size_t> exclude = {});

/// Batched denoise for rows sharing t and c.
Mat denoise_batch(const SpmDenoiser& model, const Mat& x_t, std::size_t t, std::size_t c, const PatchSet& set);

struct GenBatch {
  Mat x0;
  std::vector<std::size_t> t;
  Mat eps;
  std::vector<std::size_t> classes;  // conditioning class after any permutation
  std::vector<std::optional<std::size_t>> source_ids;
};

struct GenSetBatch {
  Mat x;
  std::vector<std::size_t> labels;  // same label space as GenBatch::classes
  std::vector<std::size_t> source_ids;
};

struct GenLossGrad {
  double value = 0.0;
  std::size_t used_rows = 0;
  std::vector<Mat> grads;  // parameters() order
};

/// Mean squared noise error over batch rows whose Q is non-empty; rows with
/// an empty Q are left out. Throws EmptySetError if every row is left out.
double gen_loss(const SpmDenoiser& model, const GenBatch& batch, const GenSetBatch& set);
GenLossGrad gen_loss_and_grad(const SpmDenoiser& model, const GenBatch& batch, const GenSetBatch& set);

/// Adam on the noise-prediction loss. Each update draws a fresh inputted set
/// and, when enabled, a fresh label permutation applied jointly to set labels
/// and conditioning classes.
SpmDenoiser fit_gen(const GenConfig& config, const LabeledDataset& train, std::uint64_t seed);

/// Ancestral sampling of n points conditioned on class c.
Mat sample(const SpmDenoiser& model, std::size_t c, const PatchSet& set, std::size_t n, std::uint64_t seed);

/// Drops every class-c element and answers class-c queries with class r.
/// Deleting a class that is absent leaves the set unchanged.
PatchSet unlearn_substitute(const PatchSet& set, std::size_t deleted, std::size_t replacement);

/// Answers class-c queries with class r without removing anything. Used to
/// condition a model retrained without class c on that class.
PatchSet redirect_class(const PatchSet& set, std::size_t c, std::size_t r);

}  // namespace spmu
