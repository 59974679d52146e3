#include "spmu/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"

namespace spmu {
namespace {

void check_pair(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() == 0) throw DomainError(std::string(what) + ": empty evaluation set");
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": prediction shapes differ");
}

std::size_t hits(const Mat& probs, std::span<const std::size_t> labels) {
  if (labels.empty()) throw DomainError("accuracy: empty dataset");
  if (probs.rows() != labels.size()) throw ShapeError("accuracy: label count mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += argmax(probs.row(i)) == labels[i];
  return hit;
}

}  // namespace

double accuracy(const Mat& probs, std::span<const std::size_t> labels) {
  return static_cast<double>(hits(probs, labels)) / static_cast<double>(labels.size());
}

double delta_acc(const Mat& probs_a, const Mat& probs_b, std::span<const std::size_t> labels) {
  const std::size_t a = hits(probs_a, labels), b = hits(probs_b, labels);
  return static_cast<double>(a > b ? a - b : b - a) / static_cast<double>(labels.size());
}

double pg_hard(const Mat& unlearned, const Mat& oracle) {
  check_pair(unlearned, oracle, "pg_hard");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < unlearned.rows(); ++i) diff += argmax(unlearned.row(i)) != argmax(oracle.row(i));
  return static_cast<double>(diff) / static_cast<double>(unlearned.rows());
}

double pg_soft(const Mat& unlearned, const Mat& oracle) {
  check_pair(unlearned, oracle, "pg_soft");
  double total = 0.0;
  for (std::size_t i = 0; i < unlearned.rows(); ++i) total += kl_div(unlearned.row(i), oracle.row(i));
  return total / static_cast<double>(unlearned.rows());
}

double oracle_margin(const Mat& oracle) {
  if (oracle.rows() == 0) throw DomainError("oracle_margin: empty evaluation set");
  if (oracle.cols() < 2) throw ShapeError("oracle_margin: need at least two classes");
  double gamma = 1.0;
  for (std::size_t i = 0; i < oracle.rows(); ++i) {
    double top1 = -1.0, top2 = -1.0;
    for (double p : oracle.row(i)) {
      if (p > top1) {
        top2 = top1;
        top1 = p;
      } else if (p > top2) {
        top2 = p;
      }
    }
    gamma = std::min(gamma, top1 - top2);
  }
  return gamma;
}

Claim1 claim1_check(const Mat& unlearned, const Mat& oracle, std::span<const std::size_t> labels) {
  Claim1 c;
  c.delta_acc = delta_acc(unlearned, oracle, labels);
  c.pg_h = pg_hard(unlearned, oracle);
  c.pg_s = pg_soft(unlearned, oracle);
  c.gamma_min = oracle_margin(oracle);
  c.applicable = c.gamma_min > 0.0;
  if (c.applicable) {
    c.bound = std::sqrt(2.0) / c.gamma_min * std::sqrt(c.pg_s);
    c.holds = c.delta_acc <= c.pg_h && c.pg_h <= c.bound;
  }
  return c;
}

SplitGaps delta_ua_ra_ta(const ProbaFn& unlearned, const ProbaFn& oracle, const LabeledDataset& train,
                         std::span<const std::size_t> forget, const LabeledDataset& test) {
  SplitGaps g;
  auto eval = [&](const LabeledDataset& ds, std::optional<double>& gap, std::optional<double>& acc) {
    if (ds.size() == 0) return;
    const Mat pu = unlearned(ds.x);
    acc = accuracy(pu, ds.y);
    gap = std::abs(*acc - accuracy(oracle(ds.x), ds.y));
  };
  std::vector<std::size_t> f(forget.begin(), forget.end());
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  eval(subset(train, f), g.ua, g.acc_u);
  eval(subset(train, complement(train.size(), f)), g.ra, g.acc_r);
  eval(test, g.ta, g.acc_t);
  return g;
}

double gen_ua(const Mat& classifier_probs, std::size_t c) {
  if (classifier_probs.rows() == 0) throw DomainError("gen_ua: no samples");
  if (c >= classifier_probs.cols()) throw DomainError("gen_ua: class out of range");
  std::size_t miss = 0;
  for (std::size_t i = 0; i < classifier_probs.rows(); ++i) miss += argmax(classifier_probs.row(i)) != c;
  return static_cast<double>(miss) / static_cast<double>(classifier_probs.rows());
}

double median_bandwidth(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw ShapeError("median_bandwidth: width mismatch");
  std::vector<std::span<const double>> rows;
  for (std::size_t i = 0; i < a.rows(); ++i) rows.push_back(a.row(i));
  for (std::size_t i = 0; i < b.rows(); ++i) rows.push_back(b.row(i));
  if (rows.size() < 2) throw DomainError("median_bandwidth: need at least two points");
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) d.push_back(std::sqrt(squared_distance(rows[i], rows[j])));
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return med;
}

double mmd_rbf(const Mat& a, const Mat& b, double bandwidth) {
  if (a.rows() == 0 || b.rows() == 0) throw DomainError("mmd_rbf: empty sample");
  if (a.cols() != b.cols()) throw ShapeError("mmd_rbf: width mismatch");
  if (a.rows() < 2 || b.rows() < 2) throw DomainError("mmd_rbf: need at least two points per sample");
  double h = bandwidth > 0.0 ? bandwidth : median_bandwidth(a, b);
  if (!(h > 0.0)) h = 1.0;  // all points coincide
  const double inv = 1.0 / (2.0 * h * h);
  auto k = [&](std::span<const double> x, std::span<const double> y) {
    return std::exp(-squared_distance(x, y) * inv);
  };
  const std::size_t m = a.rows();
  const std::size_t n = b.rows();
  if (m == n) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        total += k(a.row(i), a.row(j)) + k(b.row(i), b.row(j)) - k(a.row(i), b.row(j)) - k(a.row(j), b.row(i));
      }
    }
    return total / static_cast<double>(m * (m - 1));
  }
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) saa += k(a.row(i), a.row(j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) sbb += k(b.row(i), b.row(j));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) sab += k(a.row(i), b.row(j));
  const double dm = static_cast<double>(m);
  const double dn = static_cast<double>(n);
  return saa / (dm * (dm - 1.0)) + sbb / (dn * (dn - 1.0)) - 2.0 * sab / (dm * dn);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean_std: no values");
  MeanStd out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace spmu
