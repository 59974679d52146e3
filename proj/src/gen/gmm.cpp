#include "spmu/gen/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/rng.hpp"

namespace spmu {
namespace {

// log N(x | mu, diag(var)) for every (row, component) pair.
Mat component_log_density(const GaussianMixture& gm, const Mat& x) {
  const std::size_t k = gm.components();
  const std::size_t d = gm.dim();
  std::vector<double> norm(k);
  for (std::size_t j = 0; j < k; ++j) {
    double s = static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
    for (std::size_t a = 0; a < d; ++a) s += std::log(gm.variances(j, a));
    norm[j] = -0.5 * s;
  }
  Mat out(x.rows(), k);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double q = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double diff = x(i, a) - gm.means(j, a);
        q += diff * diff / gm.variances(j, a);
      }
      out(i, j) = norm[j] - 0.5 * q;
    }
  }
  return out;
}

double mean_ll_from(const Mat& logp) {
  const double log_w = -std::log(static_cast<double>(logp.cols()));
  double total = 0.0;
  for (std::size_t i = 0; i < logp.rows(); ++i) total += log_sum_exp(logp.row(i)) + log_w;
  return total / static_cast<double>(logp.rows());
}

}  // namespace

double mean_log_likelihood(const GaussianMixture& gm, const Mat& x) {
  if (x.rows() == 0) throw DomainError("mean_log_likelihood: no points");
  if (x.cols() != gm.dim() || gm.components() == 0) throw ShapeError("mean_log_likelihood: shape mismatch");
  return mean_ll_from(component_log_density(gm, x));
}

GaussianMixture gmm_fit(const Mat& x, std::size_t n_components, std::size_t iters, std::uint64_t seed,
                        double variance_floor) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n_components == 0) throw DomainError("gmm_fit: need at least one component");
  if (n_components > n) throw DomainError("gmm_fit: more components than points");
  if (!(variance_floor > 0.0)) throw DomainError("gmm_fit: variance floor must be positive");

  GaussianMixture gm;
  Rng rng(seed);
  const auto init = rng.sample_without_replacement(n, n_components);
  gm.means = x.gather_rows(init);
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) mean[a] += x(i, a) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) var[a] += (x(i, a) - mean[a]) * (x(i, a) - mean[a]) / static_cast<double>(n);
  gm.variances = Mat(n_components, d);
  for (std::size_t j = 0; j < n_components; ++j)
    for (std::size_t a = 0; a < d; ++a) gm.variances(j, a) = std::max(var[a], variance_floor);

  Mat logp = component_log_density(gm, x);
  gm.log_likelihood.push_back(mean_ll_from(logp));
  Mat resp(n, n_components);
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double lse = log_sum_exp(logp.row(i));
      for (std::size_t j = 0; j < n_components; ++j) resp(i, j) = std::exp(logp(i, j) - lse);
    }
    for (std::size_t j = 0; j < n_components; ++j) {
      double mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) mass += resp(i, j);
      // A component with no responsibility contributes nothing; keep it as is.
      if (!(mass > 0.0)) continue;
      for (std::size_t a = 0; a < d; ++a) {
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += resp(i, j) * x(i, a);
        mu /= mass;
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += resp(i, j) * (x(i, a) - mu) * (x(i, a) - mu);
        gm.means(j, a) = mu;
        gm.variances(j, a) = std::max(v / mass, variance_floor);
      }
    }
    logp = component_log_density(gm, x);
    gm.log_likelihood.push_back(mean_ll_from(logp));
  }
  return gm;
}

GmmModel gmm_fit_classes(const LabeledDataset& ds, std::size_t n_components, std::size_t iters,
                         std::uint64_t seed, double variance_floor) {
  ds.validate();
  GmmModel model;
  model.variance_floor = variance_floor;
  model.classes.resize(ds.num_classes);
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.y[i] == c) rows.push_back(i);
    if (rows.empty()) continue;
    model.classes[c] = gmm_fit(ds.x.gather_rows(rows), std::min(n_components, rows.size()), iters,
                               mix_seed(seed + c), variance_floor);
  }
  return model;
}

Mat gmm_sample(const GaussianMixture& gm, std::size_t n, std::uint64_t seed) {
  if (gm.components() == 0) throw ConditioningError("gmm_sample: empty mixture");
  Rng rng(seed);
  Mat out(n, gm.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = rng.below(gm.components());
    for (std::size_t a = 0; a < gm.dim(); ++a) {
      out(i, a) = gm.means(j, a) + std::sqrt(gm.variances(j, a)) * rng.normal();
    }
  }
  return out;
}

Mat gmm_sample(const GmmModel& model, std::size_t c, std::size_t n, std::uint64_t seed) {
  if (c >= model.classes.size()) throw DomainError("gmm_sample: class out of range");
  return gmm_sample(model.classes[c], n, seed);
}

}  // namespace spmu
