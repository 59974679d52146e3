#include "spmu/unlearn/parametric.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/optim.hpp"
#include "spmu/numeric/tape.hpp"

namespace spmu {

void ParametricConfig::validate() const {
  if (input_dim == 0) throw DomainError("parametric config: zero input width");
  if (num_classes < 2) throw DomainError("parametric config: need at least two classes");
  if (batch_size == 0) throw DomainError("parametric config: batch_size must be positive");
  if (!(lr > 0.0)) throw DomainError("parametric config: lr must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw DomainError("parametric config: zero hidden width");
}

Mat ParametricClassifier::predict_proba(const Mat& x) const {
  if (x.cols() != config.input_dim) throw ShapeError("parametric: input width mismatch");
  Mat logits = forward(net, x);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto p = softmax(logits.row(r));
    std::copy(p.begin(), p.end(), logits.row(r).begin());
  }
  return logits;
}

std::vector<Mat*> ParametricClassifier::parameters() {
  std::vector<Mat*> out;
  append_parameters(net, out);
  return out;
}

std::vector<const Mat*> ParametricClassifier::parameters() const {
  std::vector<const Mat*> out;
  append_parameters(net, out);
  return out;
}

ParametricClassifier init_parametric(const ParametricConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<std::size_t> widths{config.input_dim};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.num_classes);
  return ParametricClassifier{config, init_mlp(widths, false, rng)};
}

double parametric_loss(const ParametricClassifier& model, const Mat& x, const std::vector<std::size_t>& y) {
  if (x.rows() == 0 || y.size() != x.rows()) throw ShapeError("parametric_loss: label count mismatch");
  const Mat p = model.predict_proba(x);
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total -= std::log(std::max(p(i, y.at(i)), kProbFloor));
  return total / static_cast<double>(y.size());
}

std::vector<Mat> parametric_grad(const ParametricClassifier& model, const Mat& x, const std::vector<std::size_t>& y,
                                 double* loss_out) {
  if (x.rows() == 0 || y.size() != x.rows()) throw ShapeError("parametric_grad: label count mismatch");
  GradTape tape;
  const MlpVars net = bind(tape, model.net);
  const Var logits = forward(net, tape.constant(x));
  const Var probs = ad::masked_softmax_rows(logits, std::vector<std::uint8_t>(logits.value().size(), 1));
  const Var loss = ad::mean_nll(probs, y);
  tape.backward(loss);
  if (loss_out) *loss_out = loss.value()(0, 0);
  std::vector<Mat> grads;
  append_gradients(net, grads);
  return grads;
}

ParametricClassifier fit_parametric(const ParametricConfig& config, const LabeledDataset& train, std::uint64_t seed) {
  train.validate();
  if (train.dim() != config.input_dim) throw ShapeError("fit_parametric: dataset width differs from config");
  if (train.num_classes != config.num_classes) throw ShapeError("fit_parametric: class count differs from config");
  if (train.size() == 0) throw DomainError("fit_parametric: empty training set");
  ParametricClassifier model = init_parametric(config, seed);
  Rng rng(mix_seed(seed));
  Adam adam(AdamHyper{config.lr});
  auto params = model.parameters();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> rows(order.data() + start,
                                              std::min(order.size(), start + config.batch_size) - start);
      std::vector<std::size_t> y;
      for (std::size_t r : rows) y.push_back(train.y[r]);
      double loss = 0.0;
      const auto grads = parametric_grad(model, train.x.gather_rows(rows), y, &loss);
      if (!std::isfinite(loss)) throw DivergenceError("fit_parametric: non-finite training loss");
      adam.step(params, grads);
    }
  }
  return model;
}

BaselineOutcome unlearn_ga(const ParametricClassifier& model, const LabeledDataset& forget, std::size_t steps,
                           double lr) {
  if (forget.size() == 0) throw DomainError("unlearn_ga: empty forget set");
  const auto start = std::chrono::steady_clock::now();
  BaselineOutcome out{model};
  Adam adam(AdamHyper{lr});
  auto params = out.model.parameters();
  for (std::size_t s = 0; s < steps; ++s) {
    double loss = 0.0;
    const auto grads = parametric_grad(out.model, forget.x, forget.y, &loss);
    if (!std::isfinite(loss)) {
      out.diverged = true;
      break;
    }
    adam.step(params, grads, true);
    ++out.steps_done;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

BaselineOutcome unlearn_ft(const ParametricClassifier& model, const LabeledDataset& retain, std::size_t steps,
                           double lr, std::uint64_t seed) {
  if (retain.size() == 0) throw DomainError("unlearn_ft: empty retain set");
  const auto start = std::chrono::steady_clock::now();
  BaselineOutcome out{model};
  Adam adam(AdamHyper{lr});
  Rng rng(seed);
  auto params = out.model.parameters();
  const std::size_t bsz = std::min(model.config.batch_size, retain.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const auto rows = rng.sample_without_replacement(retain.size(), bsz);
    std::vector<std::size_t> y;
    for (std::size_t r : rows) y.push_back(retain.y[r]);
    double loss = 0.0;
    const auto grads = parametric_grad(out.model, retain.x.gather_rows(rows), y, &loss);
    if (!std::isfinite(loss)) {
      out.diverged = true;
      break;
    }
    adam.step(params, grads);
    ++out.steps_done;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace spmu
