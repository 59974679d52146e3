#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spmu/numeric/mat.hpp"

namespace spmu {

/// Variance schedule over steps t = 1..T; vectors are indexed by t - 1.
struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  std::size_t steps() const noexcept { return beta.size(); }
  double beta_at(std::size_t t) const { return beta.at(t - 1); }
  double alpha_at(std::size_t t) const { return alpha.at(t - 1); }
  double alpha_bar_at(std::size_t t) const { return alpha_bar.at(t - 1); }
  /// Posterior variance of x_{t-1} given x_t and x_0; zero at t = 1.
  double posterior_variance(std::size_t t) const;

  void validate() const;
};

/// Linear beta from 1e-4 * 1000/T to 0.02 * 1000/T.
NoiseSchedule linear_schedule(std::size_t steps);

/// Schedule from explicit betas; throws DomainError if not increasing in (0, 1).
NoiseSchedule schedule_from_betas(std::vector<double> beta);

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
std::vector<double> forward_diffuse(std::span<const double> x0, std::size_t t, std::span<const double> eps,
                                    const NoiseSchedule& sched);

/// Row-wise forward_diffuse with one step per row.
Mat forward_diffuse(const Mat& x0, std::span<const std::size_t> t, const Mat& eps, const NoiseSchedule& sched);

/// Sinusoidal step features: [sin(t w_0), ..., sin(t w_{h-1}), cos(t w_0), ...],
/// w_i = 10000^(-i/h), h = dim/2.
std::vector<double> sinusoidal_embedding(std::size_t t, std::size_t dim);

}  // namespace spmu
