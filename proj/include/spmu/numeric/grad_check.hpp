#pragma once

#include <functional>

#include "spmu/numeric/mat.hpp"

namespace spmu {

using ScalarFn = std::function<double(const Mat&)>;
using GradFn = std::function<Mat(const Mat&)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// Throws EvaluationError if f is non-finite at any probe point and
/// DomainError if h lies outside [1e-7, 1e-4].
double grad_check(const ScalarFn& f, const GradFn& grad, const Mat& theta, double h = 1e-6);

}  // namespace spmu
