#include "spmu/numeric/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spmu/numeric/errors.hpp"

namespace spmu {

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Mat out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* br = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  Mat out(a.rows(), b.rows());
  const std::size_t d = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += ar[k] * br[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: inner dimensions differ");
  Mat out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a(r, i);
      if (ari == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += ari * br[j];
    }
  }
  return out;
}

Mat transpose(const Mat& a) {
  Mat out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Mat affine(const Mat& x, const Mat& w, const Mat& b) {
  if (x.cols() != w.rows()) throw ShapeError("affine: x.cols != W.rows");
  if (b.rows() != 1 || b.cols() != w.cols()) throw ShapeError("affine: b must be 1 x W.cols");
  Mat out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b(0, j);
  }
  return out;
}

Mat relu(Mat x) {
  for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
  return x;
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw DomainError("softmax: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    total += out[i];
  }
  for (double& o : out) o /= total;
  return out;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw DomainError("log_sum_exp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double total = 0.0;
  for (double x : v) total += std::exp(x - m);
  return m + std::log(total);
}

namespace {

void check_simplex(std::span<const double> p, const char* name) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw DomainError(std::string("kl_div: negative or NaN entry in ") + name);
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError(std::string("kl_div: ") + name + " does not sum to 1");
  }
}

}  // namespace

double kl_div(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_div: length mismatch");
  if (p.empty()) throw DomainError("kl_div: empty input");
  check_simplex(p, "p");
  check_simplex(q, "q");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    total += p[i] * std::log(p[i] / std::max(q[i], kProbFloor));
  }
  // Rounding can leave a tiny negative value when p == q.
  return std::max(total, 0.0);
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DomainError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("squared_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace spmu
