#include "spmu/gen/schedule.hpp"

#include <cmath>

#include "spmu/numeric/errors.hpp"

namespace spmu {

double NoiseSchedule::posterior_variance(std::size_t t) const {
  if (t < 1 || t > steps()) throw DomainError("posterior_variance: step out of range");
  if (t == 1) return 0.0;
  return beta_at(t) * (1.0 - alpha_bar_at(t - 1)) / (1.0 - alpha_bar_at(t));
}

void NoiseSchedule::validate() const {
  if (beta.empty()) throw DomainError("noise schedule: no steps");
  if (alpha.size() != beta.size() || alpha_bar.size() != beta.size()) {
    throw ShapeError("noise schedule: vector lengths disagree");
  }
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (!(beta[i] > 0.0 && beta[i] < 1.0)) throw DomainError("noise schedule: beta outside (0, 1)");
    if (i > 0 && !(beta[i] > beta[i - 1])) throw DomainError("noise schedule: beta not increasing");
  }
}

NoiseSchedule schedule_from_betas(std::vector<double> beta) {
  NoiseSchedule s;
  s.beta = std::move(beta);
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  double prod = 1.0;
  for (std::size_t i = 0; i < s.beta.size(); ++i) {
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  s.validate();
  return s;
}

NoiseSchedule linear_schedule(std::size_t steps) {
  if (steps < 2) throw DomainError("linear_schedule: need at least two steps");
  const double scale = 1000.0 / static_cast<double>(steps);
  const double lo = 1e-4 * scale;
  const double hi = 0.02 * scale;
  if (hi >= 1.0) throw DomainError("linear_schedule: too few steps for the rescaled range");
  std::vector<double> beta(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    beta[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  return schedule_from_betas(std::move(beta));
}

std::vector<double> forward_diffuse(std::span<const double> x0, std::size_t t, std::span<const double> eps,
                                    const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps()) throw DomainError("forward_diffuse: step out of range");
  if (x0.size() != eps.size()) throw ShapeError("forward_diffuse: noise width mismatch");
  const double a = std::sqrt(sched.alpha_bar_at(t));
  const double b = std::sqrt(1.0 - sched.alpha_bar_at(t));
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

Mat forward_diffuse(const Mat& x0, std::span<const std::size_t> t, const Mat& eps, const NoiseSchedule& sched) {
  if (!x0.same_shape(eps)) throw ShapeError("forward_diffuse: noise shape mismatch");
  if (t.size() != x0.rows()) throw ShapeError("forward_diffuse: one step per row required");
  Mat out(x0.rows(), x0.cols());
  for (std::size_t r = 0; r < x0.rows(); ++r) {
    const auto row = forward_diffuse(x0.row(r), t[r], eps.row(r), sched);
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

std::vector<double> sinusoidal_embedding(std::size_t t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw DomainError("sinusoidal_embedding: dim must be even and positive");
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double w = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    out[i] = std::sin(static_cast<double>(t) * w);
    out[half + i] = std::cos(static_cast<double>(t) * w);
  }
  return out;
}

}  // namespace spmu
