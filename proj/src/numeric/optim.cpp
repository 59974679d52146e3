#include "spmu/numeric/optim.hpp"

#include <cmath>

#include "spmu/numeric/errors.hpp"

namespace spmu {

Mat sgd_step(const Mat& theta, const Mat& grad, double lr) {
  if (!theta.same_shape(grad)) throw ShapeError("sgd_step: shape mismatch");
  if (!(lr > 0.0)) throw DomainError("sgd_step: lr must be positive");
  Mat out = theta;
  auto o = out.values();
  auto g = grad.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= lr * g[i];
  return out;
}

Mat adam_step(const Mat& theta, const Mat& grad, AdamState& state, const AdamHyper& hyper) {
  if (!theta.same_shape(grad)) throw ShapeError("adam_step: shape mismatch");
  if (!(hyper.lr > 0.0)) throw DomainError("adam_step: lr must be positive");
  if (state.m.empty()) {
    state.m = Mat(theta.rows(), theta.cols());
    state.v = Mat(theta.rows(), theta.cols());
    state.step = 0;
  }
  if (!state.m.same_shape(theta)) throw ShapeError("adam_step: state shape mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  Mat out = theta;
  auto o = out.values();
  auto g = grad.values();
  auto m = state.m.values();
  auto v = state.v.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    o[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
  return out;
}

void Adam::step(const std::vector<Mat*>& params, const std::vector<Mat>& grads, bool ascend) {
  if (params.size() != grads.size()) throw ShapeError("Adam::step: parameter/gradient count mismatch");
  if (states_.empty()) states_.resize(params.size());
  if (states_.size() != params.size()) throw ShapeError("Adam::step: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (ascend) {
      *params[i] = adam_step(*params[i], grads[i] * -1.0, states_[i], hyper_);
    } else {
      *params[i] = adam_step(*params[i], grads[i], states_[i], hyper_);
    }
  }
}

}  // namespace spmu
