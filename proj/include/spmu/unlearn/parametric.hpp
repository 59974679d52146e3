#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spmu/data/dataset.hpp"
#include "spmu/numeric/layers.hpp"
#include "spmu/numeric/mat.hpp"

namespace spmu {

/// Plain MLP classifier with a softmax head; the GA/FT baselines act on it.
struct ParametricConfig {
  std::size_t input_dim = 2;
  std::size_t num_classes = 2;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double lr = 1e-3;

  void validate() const;
};

struct ParametricClassifier {
  ParametricConfig config;
  Mlp net;  // last layer emits logits

  Mat predict_proba(const Mat& x) const;
  std::vector<Mat*> parameters();
  std::vector<const Mat*> parameters() const;
};

ParametricClassifier init_parametric(const ParametricConfig& config, std::uint64_t seed);
ParametricClassifier fit_parametric(const ParametricConfig& config, const LabeledDataset& train, std::uint64_t seed);

/// Mean cross-entropy and its gradient in parameters() order.
double parametric_loss(const ParametricClassifier& model, const Mat& x, const std::vector<std::size_t>& y);
std::vector<Mat> parametric_grad(const ParametricClassifier& model, const Mat& x, const std::vector<std::size_t>& y,
                                 double* loss_out = nullptr);

struct BaselineOutcome {
  ParametricClassifier model;
  std::size_t steps_done = 0;
  bool diverged = false;
  double seconds = 0.0;
};

/// Full-batch Adam ascent on the forget-set loss. Stops early, flagged, on a non-finite loss.
BaselineOutcome unlearn_ga(const ParametricClassifier& model, const LabeledDataset& forget, std::size_t steps = 50,
                           double lr = 1e-3);

/// Minibatch Adam descent on the retain-set loss.
BaselineOutcome unlearn_ft(const ParametricClassifier& model, const LabeledDataset& retain, std::size_t steps = 500,
                           double lr = 1e-3, std::uint64_t seed = 0);

}  // namespace spmu
