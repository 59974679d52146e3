#pragma once

#include <cstddef>
#include <vector>

#include "spmu/numeric/mat.hpp"

namespace spmu {

Mat sgd_step(const Mat& theta, const Mat& grad, double lr);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Mat m;
  Mat v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update. An empty state is initialized to zeros.
Mat adam_step(const Mat& theta, const Mat& grad, AdamState& state, const AdamHyper& hyper);

/// Adam over a fixed list of parameter tensors.
class Adam {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  /// Descends along `grads`; pass ascend=true for gradient ascent.
  void step(const std::vector<Mat*>& params, const std::vector<Mat>& grads, bool ascend = false);

  const AdamHyper& hyper() const noexcept { return hyper_; }

 private:
  AdamHyper hyper_;
  std::vector<AdamState> states_;
};

}  // namespace spmu
