#pragma once

#include <cstddef>
#include <vector>

#include "spmu/numeric/mat.hpp"
#include "spmu/numeric/rng.hpp"
#include "spmu/numeric/tape.hpp"

namespace spmu {

struct Dense {
  Mat weight;  // in x out
  Mat bias;    // 1 x out

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }
};

/// Weights and bias uniform in +-1/sqrt(fan_in).
Dense init_dense(std::size_t in, std::size_t out, Rng& rng);

/// Stack of affine layers with ReLU between them; `relu_output` also
/// rectifies the final layer.
struct Mlp {
  std::vector<Dense> layers;
  bool relu_output = true;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
};

/// widths = {in, hidden..., out}
Mlp init_mlp(const std::vector<std::size_t>& widths, bool relu_output, Rng& rng);

Mat forward(const Mlp& net, const Mat& x);

void append_parameters(Mlp& net, std::vector<Mat*>& out);
void append_parameters(const Mlp& net, std::vector<const Mat*>& out);

/// Tape-bound view of an Mlp: one param Var per weight and bias.
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
  bool relu_output = true;
};

MlpVars bind(GradTape& tape, const Mlp& net);
Var forward(const MlpVars& net, Var x);

/// Gradients of a bound Mlp, in append_parameters order.
void append_gradients(const MlpVars& net, std::vector<Mat>& out);

/// Gradient of a param Var; zeros if it received none.
Mat grad_or_zero(Var v);

/// Total parameter count over a list.
std::size_t count_parameters(const std::vector<const Mat*>& params);

/// Concatenates parameters into a 1 x P row and writes such a row back.
Mat flatten(const std::vector<const Mat*>& params);
void unflatten(const Mat& flat, const std::vector<Mat*>& params);

}  // namespace spmu
