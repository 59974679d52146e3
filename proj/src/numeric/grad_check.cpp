#include "spmu/numeric/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "spmu/numeric/errors.hpp"

namespace spmu {

double grad_check(const ScalarFn& f, const GradFn& grad, const Mat& theta, double h) {
  if (!(h >= 1e-7 && h <= 1e-4)) throw DomainError("grad_check: step must lie in [1e-7, 1e-4]");
  const Mat analytic = grad(theta);
  if (!analytic.same_shape(theta)) throw ShapeError("grad_check: gradient shape differs from theta");
  Mat probe = theta;
  double worst = 0.0;
  auto p = probe.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double up = f(probe);
    p[i] = saved - h;
    const double down = f(probe);
    p[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw EvaluationError("grad_check: non-finite function value near theta");
    }
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.values()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

}  // namespace spmu
