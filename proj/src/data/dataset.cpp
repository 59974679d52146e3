#include "spmu/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/rng.hpp"

namespace spmu {

void LabeledDataset::validate() const {
  if (y.empty()) throw DomainError("dataset: no samples");
  if (x.rows() != y.size()) throw ShapeError("dataset: feature rows differ from label count");
  for (std::size_t label : y) {
    if (label >= num_classes) throw DomainError("dataset: label outside [0, C)");
  }
  if (!x.all_finite()) throw DomainError("dataset: non-finite feature");
}

LabeledDataset gen_blobs(std::size_t num_classes, std::size_t per_class, const Mat& centers,
                         double sigma, std::uint64_t seed) {
  if (num_classes < 2) throw DomainError("gen_blobs: need at least two classes");
  if (!(sigma > 0.0)) throw DomainError("gen_blobs: sigma must be positive");
  if (centers.rows() != num_classes) throw ShapeError("gen_blobs: one center per class required");
  Rng rng(seed);
  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.x = Mat(num_classes * per_class, centers.cols());
  ds.y.resize(num_classes * per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      for (std::size_t d = 0; d < centers.cols(); ++d) ds.x(row, d) = centers(c, d) + sigma * rng.normal();
      ds.y[row] = c;
    }
  }
  return ds;
}

LabeledDataset gen_moons(std::size_t per_class, double noise, std::uint64_t seed) {
  if (!(noise >= 0.0)) throw DomainError("gen_moons: noise must be non-negative");
  if (per_class == 0) throw DomainError("gen_moons: per_class must be positive");
  Rng rng(seed);
  LabeledDataset ds;
  ds.num_classes = 2;
  ds.x = Mat(2 * per_class, 2);
  ds.y.resize(2 * per_class);
  const double denom = per_class > 1 ? static_cast<double>(per_class - 1) : 1.0;
  for (std::size_t i = 0; i < per_class; ++i) {
    const double theta = std::numbers::pi * static_cast<double>(i) / denom;
    ds.x(i, 0) = std::cos(theta);
    ds.x(i, 1) = std::sin(theta);
    ds.y[i] = 0;
    const std::size_t j = per_class + i;
    ds.x(j, 0) = 1.0 - std::cos(theta);
    ds.x(j, 1) = 0.5 - std::sin(theta);
    ds.y[j] = 1;
  }
  if (noise > 0.0) {
    for (double& v : ds.x.values()) v += noise * rng.normal();
  }
  return ds;
}

LabeledDataset append_cluster(const LabeledDataset& ds, std::span<const double> center, double sigma,
                              std::size_t count, std::size_t label, std::uint64_t seed) {
  if (center.size() != ds.dim()) throw ShapeError("append_cluster: center width mismatch");
  if (!(sigma >= 0.0)) throw DomainError("append_cluster: sigma must be non-negative");
  Rng rng(seed);
  LabeledDataset out;
  out.num_classes = std::max(ds.num_classes, label + 1);
  out.x = Mat(ds.size() + count, ds.dim());
  std::copy(ds.x.values().begin(), ds.x.values().end(), out.x.values().begin());
  out.y = ds.y;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t row = ds.size() + i;
    for (std::size_t d = 0; d < ds.dim(); ++d) out.x(row, d) = center[d] + sigma * rng.normal();
    out.y.push_back(label);
  }
  return out;
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> indices) {
  LabeledDataset out;
  out.num_classes = ds.num_classes;
  out.x = ds.x.gather_rows(indices);
  out.y.reserve(indices.size());
  for (std::size_t i : indices) out.y.push_back(ds.y[i]);
  return out;
}

std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> removed) {
  std::vector<bool> gone(n, false);
  for (std::size_t i : removed) {
    if (i >= n) throw DomainError("complement: index out of range");
    gone[i] = true;
  }
  std::vector<std::size_t> keep;
  keep.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!gone[i]) keep.push_back(i);
  return keep;
}

std::vector<std::size_t> class_counts(const LabeledDataset& ds) {
  std::vector<std::size_t> counts(ds.num_classes, 0);
  for (std::size_t label : ds.y) ++counts.at(label);
  return counts;
}

Mat one_hot(std::span<const std::size_t> labels, std::size_t num_classes) {
  Mat out(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw DomainError("one_hot: label outside [0, C)");
    out(i, labels[i]) = 1.0;
  }
  return out;
}

Split split(const LabeledDataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DomainError("split: fraction must lie in (0, 1)");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.y[i]].push_back(i);
  Split out;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    if (members.size() < 2) throw DomainError("split: a class has fewer than two samples");
    rng.shuffle(std::span<std::size_t>(members));
    const double want = std::round(test_fraction * static_cast<double>(members.size()));
    const std::size_t n_test =
        std::clamp<std::size_t>(static_cast<std::size_t>(want), 1, members.size() - 1);
    out.test_index.insert(out.test_index.end(), members.begin(), members.begin() + n_test);
    out.train_index.insert(out.train_index.end(), members.begin() + n_test, members.end());
  }
  std::sort(out.train_index.begin(), out.train_index.end());
  std::sort(out.test_index.begin(), out.test_index.end());
  out.train = subset(ds, out.train_index);
  out.test = subset(ds, out.test_index);
  return out;
}

}  // namespace spmu
