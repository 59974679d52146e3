#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spmu/numeric/mat.hpp"

namespace spmu {

class GradTape;

/// Handle to a value recorded on a GradTape.
struct Var {
  GradTape* tape = nullptr;
  std::size_t id = 0;

  const Mat& value() const;
  const Mat& grad() const;
};

/// Reverse-mode tape over matrix primitives. Each record caches the inputs its
/// backward rule needs; backward() walks the records once, newest first.
class GradTape {
 public:
  using BackwardFn = std::function<void(GradTape&, std::size_t self)>;

  Var param(Mat value);
  Var constant(Mat value);

  /// Appends a primitive result. `needs_grad` should be true iff any input needs it.
  Var record(Mat value, bool needs_grad, BackwardFn backward);

  const Mat& value(std::size_t id) const { return records_[id].value; }
  const Mat& grad(std::size_t id) const { return records_[id].grad; }
  bool needs_grad(std::size_t id) const { return records_[id].needs_grad; }

  /// Gradient accumulator for `id`, zero-initialized on first access.
  Mat& grad_acc(std::size_t id);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
  void backward(Var root);

  std::size_t size() const noexcept { return records_.size(); }

 private:
  struct Record {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  std::vector<Record> records_;
};

namespace ad {

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);                 // a * b^T
Var add(Var a, Var b);                       // same shape
Var add_bias(Var x, Var b);                  // b is 1 x cols, broadcast over rows
Var relu(Var x);
Var affine(Var x, Var w, Var b);

/// Row-wise softmax restricted to entries with keep[i*cols+j] != 0. Dropped
/// entries are never read and get probability 0; a row with nothing kept is
/// all zeros.
Var masked_softmax_rows(Var logits, std::vector<std::uint8_t> keep);

/// out[i] = table[index[i]]; gradients scatter-add back into the table.
Var gather_rows(Var table, std::vector<std::size_t> index);

/// Additive attention scores: out[b,j] = sum_k w[k] * relu(q[b,k] + key[j,k] + bias[k]).
/// q: B x d, key: m x d, bias: 1 x d, w: d x 1.
Var additive_scores(Var q, Var key, Var bias, Var w);

/// Mean over rows with weight > 0 of -ln(max(p[i, target[i]], kProbFloor)).
Var mean_nll(Var probs, std::vector<std::size_t> target);

/// Mean over rows with weight > 0 of ||pred[i] - target[i]||^2 / cols.
Var weighted_mse(Var pred, Mat target, std::vector<double> row_weight);

/// Scalar sum of all entries times s.
Var scaled_sum(Var x, double s);

}  // namespace ad
}  // namespace spmu
