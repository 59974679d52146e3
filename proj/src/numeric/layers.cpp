#include "spmu/numeric/layers.hpp"

#include <algorithm>
#include <cmath>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"

namespace spmu {

Dense init_dense(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Dense d{Mat(in, out), Mat(1, out)};
  for (double& v : d.weight.values()) v = rng.uniform(-bound, bound);
  for (double& v : d.bias.values()) v = rng.uniform(-bound, bound);
  return d;
}

std::size_t Mlp::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
std::size_t Mlp::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

Mlp init_mlp(const std::vector<std::size_t>& widths, bool relu_output, Rng& rng) {
  if (widths.size() < 2) throw DomainError("init_mlp: need at least input and output widths");
  Mlp net;
  net.relu_output = relu_output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    net.layers.push_back(init_dense(widths[i], widths[i + 1], rng));
  }
  return net;
}

Mat forward(const Mlp& net, const Mat& x) {
  if (x.cols() != net.in_dim()) throw ShapeError("Mlp forward: input width mismatch");
  Mat h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    h = affine(h, net.layers[i].weight, net.layers[i].bias);
    if (i + 1 < net.layers.size() || net.relu_output) h = relu(std::move(h));
  }
  return h;
}

void append_parameters(Mlp& net, std::vector<Mat*>& out) {
  for (auto& layer : net.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
}

void append_parameters(const Mlp& net, std::vector<const Mat*>& out) {
  for (const auto& layer : net.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
}

MlpVars bind(GradTape& tape, const Mlp& net) {
  MlpVars vars;
  vars.relu_output = net.relu_output;
  for (const auto& layer : net.layers) {
    vars.weights.push_back(tape.param(layer.weight));
    vars.biases.push_back(tape.param(layer.bias));
  }
  return vars;
}

Var forward(const MlpVars& net, Var x) {
  if (x.value().cols() != net.weights.front().value().rows()) {
    throw ShapeError("Mlp forward: input width mismatch");
  }
  Var h = x;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    h = ad::affine(h, net.weights[i], net.biases[i]);
    if (i + 1 < net.weights.size() || net.relu_output) h = ad::relu(h);
  }
  return h;
}

Mat grad_or_zero(Var v) {
  const Mat& g = v.grad();
  if (!g.empty()) return g;
  return Mat(v.value().rows(), v.value().cols());
}

void append_gradients(const MlpVars& net, std::vector<Mat>& out) {
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    out.push_back(grad_or_zero(net.weights[i]));
    out.push_back(grad_or_zero(net.biases[i]));
  }
}

std::size_t count_parameters(const std::vector<const Mat*>& params) {
  std::size_t n = 0;
  for (const Mat* p : params) n += p->size();
  return n;
}

Mat flatten(const std::vector<const Mat*>& params) {
  Mat out(1, count_parameters(params));
  std::size_t offset = 0;
  for (const Mat* p : params) {
    std::copy(p->values().begin(), p->values().end(), out.values().begin() + offset);
    offset += p->size();
  }
  return out;
}

void unflatten(const Mat& flat, const std::vector<Mat*>& params) {
  std::size_t total = 0;
  for (const Mat* p : params) total += p->size();
  if (flat.size() != total) throw ShapeError("unflatten: length mismatch");
  std::size_t offset = 0;
  for (Mat* p : params) {
    std::copy_n(flat.values().begin() + offset, p->size(), p->values().begin());
    offset += p->size();
  }
}

}  // namespace spmu
