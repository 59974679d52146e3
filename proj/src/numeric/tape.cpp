#include "spmu/numeric/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"

namespace spmu {

const Mat& Var::value() const { return tape->value(id); }
const Mat& Var::grad() const { return tape->grad(id); }

Var GradTape::param(Mat value) { return record(std::move(value), true, nullptr); }

Var GradTape::constant(Mat value) { return record(std::move(value), false, nullptr); }

Var GradTape::record(Mat value, bool needs_grad, BackwardFn backward) {
  records_.push_back(Record{std::move(value), Mat{}, needs_grad, std::move(backward)});
  return Var{this, records_.size() - 1};
}

Mat& GradTape::grad_acc(std::size_t id) {
  Record& r = records_[id];
  if (r.grad.empty() && !r.value.empty()) r.grad = Mat(r.value.rows(), r.value.cols());
  return r.grad;
}

void GradTape::backward(Var root) {
  if (root.tape != this) throw DomainError("backward: variable belongs to another tape");
  const Mat& v = value(root.id);
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward: root must be a scalar");
  for (auto& r : records_) r.grad = Mat{};
  grad_acc(root.id)(0, 0) = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Record& r = records_[i];
    if (!r.needs_grad || !r.backward || r.grad.empty()) continue;
    r.backward(*this, i);
  }
}

namespace ad {
namespace {

GradTape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw DomainError("ad: variables on different tapes");
  return *a.tape;
}

bool any_grad(GradTape& t, std::initializer_list<Var> vars) {
  return std::any_of(vars.begin(), vars.end(), [&](Var v) { return t.needs_grad(v.id); });
}

}  // namespace

Var matmul(Var a, Var b) {
  GradTape& t = tape_of(a, b);
  Mat out = spmu::matmul(t.value(a.id), t.value(b.id));
  return t.record(std::move(out), any_grad(t, {a, b}), [a, b](GradTape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(a.id)) tp.grad_acc(a.id) += matmul_nt(g, tp.value(b.id));
    if (tp.needs_grad(b.id)) tp.grad_acc(b.id) += matmul_tn(tp.value(a.id), g);
  });
}

Var matmul_nt(Var a, Var b) {
  GradTape& t = tape_of(a, b);
  Mat out = spmu::matmul_nt(t.value(a.id), t.value(b.id));
  return t.record(std::move(out), any_grad(t, {a, b}), [a, b](GradTape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(a.id)) tp.grad_acc(a.id) += spmu::matmul(g, tp.value(b.id));
    if (tp.needs_grad(b.id)) tp.grad_acc(b.id) += matmul_tn(g, tp.value(a.id));
  });
}

Var add(Var a, Var b) {
  GradTape& t = tape_of(a, b);
  Mat out = t.value(a.id) + t.value(b.id);
  return t.record(std::move(out), any_grad(t, {a, b}), [a, b](GradTape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(a.id)) tp.grad_acc(a.id) += g;
    if (tp.needs_grad(b.id)) tp.grad_acc(b.id) += g;
  });
}

Var add_bias(Var x, Var b) {
  GradTape& t = tape_of(x, b);
  const Mat& xv = t.value(x.id);
  const Mat& bv = t.value(b.id);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) throw ShapeError("add_bias: bias must be 1 x cols");
  Mat out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv(0, j);
  }
  return t.record(std::move(out), any_grad(t, {x, b}), [x, b](GradTape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(x.id)) tp.grad_acc(x.id) += g;
    if (tp.needs_grad(b.id)) {
      Mat& gb = tp.grad_acc(b.id);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
    }
  });
}

Var relu(Var x) {
  GradTape& t = *x.tape;
  Mat out = spmu::relu(t.value(x.id));
  return t.record(std::move(out), t.needs_grad(x.id), [x](GradTape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    const Mat& xv = tp.value(x.id);
    Mat& gx = tp.grad_acc(x.id);
    auto gv = g.values();
    auto in = xv.values();
    auto dst = gx.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (in[i] > 0.0) dst[i] += gv[i];
  });
}

Var affine(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

Var masked_softmax_rows(Var logits, std::vector<std::uint8_t> keep) {
  GradTape& t = *logits.tape;
  const Mat& lv = t.value(logits.id);
  if (keep.size() != lv.size()) throw ShapeError("masked_softmax_rows: mask size mismatch");
  Mat out(lv.rows(), lv.cols());
  for (std::size_t i = 0; i < lv.rows(); ++i) {
    const std::uint8_t* k = keep.data() + i * lv.cols();
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < lv.cols(); ++j)
      if (k[j]) m = std::max(m, lv(i, j));
    if (m == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < lv.cols(); ++j) {
      if (!k[j]) continue;
      out(i, j) = std::exp(lv(i, j) - m);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < lv.cols(); ++j) out(i, j) /= total;
  }
  return t.record(std::move(out), t.needs_grad(logits.id),
                  [logits, keep = std::move(keep)](GradTape& tp, std::size_t self) {
                    const Mat& g = tp.grad(self);
                    const Mat& p = tp.value(self);
                    Mat& gl = tp.grad_acc(logits.id);
                    for (std::size_t i = 0; i < p.rows(); ++i) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < p.cols(); ++j) dot += g(i, j) * p(i, j);
                      for (std::size_t j = 0; j < p.cols(); ++j)
                        if (keep[i * p.cols() + j]) gl(i, j) += p(i, j) * (g(i, j) - dot);
                    }
                  });
}

Var gather_rows(Var table, std::vector<std::size_t> index) {
  GradTape& t = *table.tape;
  Mat out = t.value(table.id).gather_rows(index);
  return t.record(std::move(out), t.needs_grad(table.id),
                  [table, index = std::move(index)](GradTape& tp, std::size_t self) {
                    const Mat& g = tp.grad(self);
                    Mat& gt = tp.grad_acc(table.id);
                    for (std::size_t i = 0; i < index.size(); ++i) {
                      auto dst = gt.row(index[i]);
                      auto src = g.row(i);
                      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
                    }
                  });
}

Var additive_scores(Var q, Var key, Var bias, Var w) {
  GradTape& t = tape_of(q, key);
  tape_of(q, bias);
  tape_of(q, w);
  const Mat& qv = t.value(q.id);
  const Mat& kv = t.value(key.id);
  const Mat& bv = t.value(bias.id);
  const Mat& wv = t.value(w.id);
  const std::size_t d = qv.cols();
  if (kv.cols() != d || bv.rows() != 1 || bv.cols() != d || wv.rows() != d || wv.cols() != 1) {
    throw ShapeError("additive_scores: dimension mismatch");
  }
  Mat out(qv.rows(), kv.rows());
  for (std::size_t b = 0; b < qv.rows(); ++b) {
    const double* qb = qv.row(b).data();
    for (std::size_t j = 0; j < kv.rows(); ++j) {
      const double* kj = kv.row(j).data();
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double pre = qb[c] + kj[c] + bv(0, c);
        if (pre > 0.0) acc += wv(c, 0) * pre;
      }
      out(b, j) = acc;
    }
  }
  return t.record(std::move(out), any_grad(t, {q, key, bias, w}),
                  [q, key, bias, w, d](GradTape& tp, std::size_t self) {
                    const Mat& g = tp.grad(self);
                    const Mat& qv = tp.value(q.id);
                    const Mat& kv = tp.value(key.id);
                    const Mat& bv = tp.value(bias.id);
                    const Mat& wv = tp.value(w.id);
                    Mat gq(qv.rows(), d), gk(kv.rows(), d), gb(1, d), gw(d, 1);
                    for (std::size_t b = 0; b < qv.rows(); ++b) {
                      const double* qb = qv.row(b).data();
                      double* gqb = gq.row(b).data();
                      for (std::size_t j = 0; j < kv.rows(); ++j) {
                        const double gbj = g(b, j);
                        if (gbj == 0.0) continue;
                        const double* kj = kv.row(j).data();
                        double* gkj = gk.row(j).data();
                        for (std::size_t c = 0; c < d; ++c) {
                          const double pre = qb[c] + kj[c] + bv(0, c);
                          if (pre <= 0.0) continue;
                          gw(c, 0) += gbj * pre;
                          const double up = gbj * wv(c, 0);
                          gqb[c] += up;
                          gkj[c] += up;
                          gb(0, c) += up;
                        }
                      }
                    }
                    if (tp.needs_grad(q.id)) tp.grad_acc(q.id) += gq;
                    if (tp.needs_grad(key.id)) tp.grad_acc(key.id) += gk;
                    if (tp.needs_grad(bias.id)) tp.grad_acc(bias.id) += gb;
                    if (tp.needs_grad(w.id)) tp.grad_acc(w.id) += gw;
                  });
}

Var mean_nll(Var probs, std::vector<std::size_t> target) {
  GradTape& t = *probs.tape;
  const Mat& p = t.value(probs.id);
  if (target.size() != p.rows() || p.rows() == 0) throw ShapeError("mean_nll: target count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    if (target[i] >= p.cols()) throw DomainError("mean_nll: target out of range");
    total -= std::log(std::max(p(i, target[i]), kProbFloor));
  }
  const double n = static_cast<double>(p.rows());
  return t.record(Mat(1, 1, total / n), t.needs_grad(probs.id),
                  [probs, target = std::move(target), n](GradTape& tp, std::size_t self) {
                    const double g = tp.grad(self)(0, 0);
                    const Mat& p = tp.value(probs.id);
                    Mat& gp = tp.grad_acc(probs.id);
                    for (std::size_t i = 0; i < p.rows(); ++i) {
                      const double pi = p(i, target[i]);
                      if (pi > kProbFloor) gp(i, target[i]) -= g / (n * pi);
                    }
                  });
}

Var weighted_mse(Var pred, Mat target, std::vector<double> row_weight) {
  GradTape& t = *pred.tape;
  const Mat& p = t.value(pred.id);
  if (!p.same_shape(target) || row_weight.size() != p.rows()) {
    throw ShapeError("weighted_mse: shape mismatch");
  }
  double wsum = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    if (row_weight[i] <= 0.0) continue;
    wsum += row_weight[i];
    double sq = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const double d = p(i, j) - target(i, j);
      sq += d * d;
    }
    total += row_weight[i] * sq;
  }
  if (wsum <= 0.0) throw EmptySetError("weighted_mse: no rows carry weight");
  const double denom = wsum * static_cast<double>(p.cols());
  return t.record(Mat(1, 1, total / denom), t.needs_grad(pred.id),
                  [pred, target = std::move(target), row_weight = std::move(row_weight), denom](
                      GradTape& tp, std::size_t self) {
                    const double g = tp.grad(self)(0, 0);
                    const Mat& p = tp.value(pred.id);
                    Mat& gp = tp.grad_acc(pred.id);
                    for (std::size_t i = 0; i < p.rows(); ++i) {
                      if (row_weight[i] <= 0.0) continue;
                      const double s = 2.0 * g * row_weight[i] / denom;
                      for (std::size_t j = 0; j < p.cols(); ++j) gp(i, j) += s * (p(i, j) - target(i, j));
                    }
                  });
}

Var scaled_sum(Var x, double s) {
  GradTape& t = *x.tape;
  double total = 0.0;
  for (double v : t.value(x.id).values()) total += v;
  return t.record(Mat(1, 1, s * total), t.needs_grad(x.id), [x, s](GradTape& tp, std::size_t self) {
    const double g = tp.grad(self)(0, 0);
    for (double& v : tp.grad_acc(x.id).values()) v += s * g;
  });
}

}  // namespace ad
}  // namespace spmu
