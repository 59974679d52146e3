#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spmu/data/dataset.hpp"
#include "spmu/numeric/mat.hpp"

namespace spmu {

inline constexpr double kVarianceFloor = 1e-6;

/// Equal-weight mixture of axis-aligned Gaussians; one row per component.
struct GaussianMixture {
  Mat means;
  Mat variances;
  std::vector<double> log_likelihood;  // mean per-point value after init and after each EM step

  std::size_t components() const noexcept { return means.rows(); }
  std::size_t dim() const noexcept { return means.cols(); }
};

/// One mixture per class; classes without data have an empty mixture.
struct GmmModel {
  std::vector<GaussianMixture> classes;
  double variance_floor = kVarianceFloor;
};

/// Mean log-density of the rows of x under the mixture.
double mean_log_likelihood(const GaussianMixture& gm, const Mat& x);

/// EM with fixed weights 1/n. Means start at distinct random data rows and
/// variances at the per-dimension data variance; all variances are clamped
/// to `variance_floor`.
GaussianMixture gmm_fit(const Mat& x, std::size_t n_components, std::size_t iters, std::uint64_t seed,
                        double variance_floor = kVarianceFloor);

GmmModel gmm_fit_classes(const LabeledDataset& ds, std::size_t n_components, std::size_t iters,
                         std::uint64_t seed, double variance_floor = kVarianceFloor);

/// Picks a component uniformly, then draws from its Gaussian.
Mat gmm_sample(const GaussianMixture& gm, std::size_t n, std::uint64_t seed);
Mat gmm_sample(const GmmModel& model, std::size_t c, std::size_t n, std::uint64_t seed);

}  // namespace spmu
