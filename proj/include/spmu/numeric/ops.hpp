#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spmu/numeric/mat.hpp"

namespace spmu {

/// Clamp floor applied to q before taking logs in KL and cross-entropy.
inline constexpr double kProbFloor = 1e-12;

Mat matmul(const Mat& a, const Mat& b);     // a * b
Mat matmul_nt(const Mat& a, const Mat& b);  // a * b^T
Mat matmul_tn(const Mat& a, const Mat& b);  // a^T * b
Mat transpose(const Mat& a);

/// out[i,j] = sum_k x[i,k] W[k,j] + b[0,j]
Mat affine(const Mat& x, const Mat& w, const Mat& b);

Mat relu(Mat x);

std::vector<double> softmax(std::span<const double> v);
double log_sum_exp(std::span<const double> v);

/// KL(p || q) with 0 ln 0 = 0 and q floored at kProbFloor.
double kl_div(std::span<const double> p, std::span<const double> q);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace spmu
