#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "spmu/data/dataset.hpp"
#include "spmu/numeric/mat.hpp"

namespace spmu {

/// Maps query rows to class-probability rows.
using ProbaFn = std::function<Mat(const Mat&)>;

/// Fraction of rows whose argmax equals the label.
double accuracy(const Mat& probs, std::span<const std::size_t> labels);
double delta_acc(const Mat& probs_a, const Mat& probs_b, std::span<const std::size_t> labels);

/// Fraction of rows where the two argmaxes differ (ties to the lowest index for both).
double pg_hard(const Mat& unlearned, const Mat& oracle);
/// Mean KL(unlearned || oracle) over rows.
double pg_soft(const Mat& unlearned, const Mat& oracle);

/// Smallest top-1 minus top-2 probability over the oracle's rows.
double oracle_margin(const Mat& oracle);

struct Claim1 {
  double delta_acc = 0.0;
  double pg_h = 0.0;
  double pg_s = 0.0;
  double bound = 0.0;  // sqrt(2) / gamma_min * sqrt(pg_s)
  double gamma_min = 0.0;
  bool applicable = false;  // gamma_min > 0
  bool holds = false;       // delta_acc <= pg_h <= bound; false when not applicable
};

Claim1 claim1_check(const Mat& unlearned, const Mat& oracle, std::span<const std::size_t> labels);

struct SplitGaps {
  std::optional<double> ua, ra, ta;        // |acc gap| on forget, retain, test
  std::optional<double> acc_u, acc_r, acc_t;  // unlearned model accuracies
};

/// Accuracy gaps on the forget rows, the remaining training rows and the test
/// set. An empty split leaves its fields unset.
SplitGaps delta_ua_ra_ta(const ProbaFn& unlearned, const ProbaFn& oracle, const LabeledDataset& train,
                         std::span<const std::size_t> forget, const LabeledDataset& test);

/// Fraction of generated samples the classifier does not assign to class c.
double gen_ua(const Mat& classifier_probs, std::size_t c);

/// Median pairwise Euclidean distance over the pooled rows of a and b.
double median_bandwidth(const Mat& a, const Mat& b);

/// Unbiased RBF-kernel MMD^2, k(x, y) = exp(-|x-y|^2 / (2 h^2)); h <= 0 selects
/// the median heuristic. Equal-size inputs use the paired statistic, whose
/// cross term also skips i = j, so identical multisets give exactly 0.
double mmd_rbf(const Mat& a, const Mat& b, double bandwidth = 0.0);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

}  // namespace spmu
