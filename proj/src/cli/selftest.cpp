#include "spmu/cli/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <utility>

#include "spmu/data/dataset.hpp"
#include "spmu/gen/denoiser.hpp"
#include "spmu/metrics/metrics.hpp"
#include "spmu/numeric/grad_check.hpp"
#include "spmu/numeric/layers.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/rng.hpp"
#include "spmu/spm/reduce.hpp"
#include "spmu/unlearn/deletion.hpp"
#include "spmu/unlearn/knn.hpp"

namespace spmu {

namespace {

Mat random_mat(std::size_t r, std::size_t c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

Mat random_proba(std::size_t n, std::size_t c, Rng& rng, double temperature) {
  Mat p(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(c);
    for (double& v : logits) v = rng.normal() * temperature;
    const auto s = softmax(logits);
    std::copy(s.begin(), s.end(), p.row(i).begin());
  }
  return p;
}

Mat flatten_grads(const std::vector<Mat>& grads) {
  std::vector<const Mat*> ptrs;
  for (const Mat& g : grads) ptrs.push_back(&g);
  return flatten(ptrs);
}

template <class Model, class Loss, class Grad>
double model_grad_error(Model model, Loss loss_fn, Grad grad_fn) {
  const Mat theta = flatten(std::as_const(model).parameters());
  auto f = [&](const Mat& th) {
    unflatten(th, model.parameters());
    return loss_fn(model);
  };
  auto g = [&](const Mat& th) {
    unflatten(th, model.parameters());
    return flatten_grads(grad_fn(model));
  };
  return grad_check(f, g, theta, 1e-6);
}

CheckResult check(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok, std::move(detail)};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

double spm_grad_error(std::uint64_t seed) {
  Rng rng(seed);
  SpmConfig cfg;
  cfg.input_dim = 3;
  cfg.num_classes = 3;
  cfg.hidden = {6};
  cfg.embed_dim = 5;
  cfg.attn_dim = 4;
  const SpmClassifier model = init_classifier(cfg, mix_seed(seed));
  QueryBatch q;
  q.x = random_mat(5, 3, rng);
  SetBatch s;
  s.x = random_mat(7, 3, rng);
  std::vector<std::size_t> labels(7);
  for (std::size_t i = 0; i < 7; ++i) {
    labels[i] = rng.below(3);
    s.source_ids.push_back(100 + i);
  }
  s.labels = one_hot(labels, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    q.targets.push_back(rng.below(3));
    q.source_ids.push_back(i < 2 ? std::optional<std::size_t>(100 + i) : std::nullopt);
  }
  return model_grad_error(
      model, [&](const SpmClassifier& m) { return loss(m, q, s); },
      [&](const SpmClassifier& m) { return loss_and_grad(m, q, s).grads; });
}

double gen_grad_error(std::uint64_t seed) {
  Rng rng(seed);
  GenConfig cfg;
  cfg.input_dim = 2;
  cfg.num_classes = 3;
  cfg.down_hidden = {6};
  cfg.up_hidden = {6};
  cfg.width = 5;
  cfg.time_dim = 4;
  cfg.steps_t = 25;
  const SpmDenoiser model = init_denoiser(cfg, mix_seed(seed));
  GenBatch b;
  b.x0 = random_mat(4, 2, rng);
  b.eps = random_mat(4, 2, rng);
  GenSetBatch s;
  s.x = random_mat(9, 2, rng);
  for (std::size_t i = 0; i < 9; ++i) {
    s.labels.push_back(i % 3);
    s.source_ids.push_back(100 + i);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    b.t.push_back(1 + rng.below(cfg.steps_t));
    b.classes.push_back(rng.below(3));
    b.source_ids.push_back(i == 0 ? std::optional<std::size_t>(100) : std::nullopt);
  }
  return model_grad_error(
      model, [&](const SpmDenoiser& m) { return gen_loss(m, b, s); },
      [&](const SpmDenoiser& m) { return gen_loss_and_grad(m, b, s).grads; });
}

std::vector<CheckResult> run_selftest() {
  std::vector<CheckResult> out;
  Rng rng(20241015);

  {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> v(6), w(6);
      const double shift = rng.uniform(-50.0, 50.0);
      for (std::size_t i = 0; i < 6; ++i) {
        v[i] = rng.normal() * 5.0;
        w[i] = v[i] + shift;
      }
      const auto a = softmax(v), b = softmax(w);
      double sum = 0.0;
      for (std::size_t i = 0; i < 6; ++i) {
        sum += a[i];
        worst = std::max(worst, std::abs(a[i] - b[i]));
      }
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    out.push_back(check("softmax simplex and shift invariance", worst <= 1e-12, "max err " + fmt(worst)));
  }

  {
    Rng a(7), b(7);
    bool same = true;
    for (int i = 0; i < 1000; ++i) same = same && a.next_u64() == b.next_u64() && a.normal() == b.normal();
    out.push_back(check("rng determinism", same));
  }

  {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 3; ++s) worst = std::max({worst, spm_grad_error(s), gen_grad_error(s)});
    out.push_back(check("analytic gradients", worst <= 1e-4, "max rel err " + fmt(worst)));
  }

  {
    const Mat p = random_proba(40, 3, rng, 2.0);
    Mat swapped(2, 2);
    swapped(0, 0) = swapped(1, 1) = 0.9;
    swapped(0, 1) = swapped(1, 0) = 0.1;
    Mat flipped(2, 2);
    flipped(0, 1) = flipped(1, 0) = 0.9;
    flipped(0, 0) = flipped(1, 1) = 0.1;
    const bool ok = pg_hard(p, p) == 0.0 && pg_soft(p, p) == 0.0 && pg_hard(swapped, flipped) == 1.0;
    out.push_back(check("prediction gap identities", ok));
  }

  {
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
      const Mat u = random_proba(30, 3, rng, 3.0);
      const Mat o = random_proba(30, 3, rng, 3.0);
      std::vector<std::size_t> y(30);
      for (auto& v : y) v = rng.below(3);
      const Claim1 c = claim1_check(u, o, y);
      ok = !c.applicable || c.holds;
    }
    out.push_back(check("accuracy gap bound chain", ok));
  }

  {
    SpmConfig cfg;
    cfg.hidden = {8};
    cfg.embed_dim = 6;
    cfg.attn_dim = 6;
    const SpmClassifier model = init_classifier(cfg, 3);
    const LabeledDataset ds = gen_moons(20, 0.1, 4);
    const std::vector<std::size_t> forget{1, 5, 6, 30};
    const SpmPredictor full(model, encode_set(model, ds));
    const SpmPredictor deleted = test_time_delete(full, forget).predictor;
    const auto keep = complement(ds.size(), forget);
    const Mat px = ds.x.gather_rows(keep);
    Mat py = one_hot(ds.y, 2).gather_rows(keep);
    const SpmPredictor fresh(model, encode_set(model, px, py, keep));
    const Mat q = random_mat(25, 2, rng);
    const double d = max_abs_diff(deleted.predict_proba(q), fresh.predict_proba(q));
    out.push_back(check("deletion equals set without forgotten rows", d <= 1e-12, "max diff " + fmt(d)));

    const KnnIndex idx = build_knn(ds);
    const double dk =
        max_abs_diff(knn_predict_proba(knn_delete(idx, forget), q, 5), knn_predict_proba(build_knn(ds, keep), q, 5));
    out.push_back(check("knn deletion equals rebuilt index", dk == 0.0));
  }

  {
    GenConfig cfg;
    cfg.down_hidden = {8};
    cfg.up_hidden = {8};
    cfg.width = 6;
    cfg.time_dim = 4;
    cfg.steps_t = 25;
    const SpmDenoiser model = init_denoiser(cfg, 9);
    const Mat q = random_mat(7, cfg.width, rng);
    std::vector<double> z(cfg.width);
    for (double& v : z) v = rng.normal();
    const auto w = fusion_weights(model, z, q);
    double sum = 0.0;
    bool nonneg = true;
    for (double v : w) {
      sum += v;
      nonneg = nonneg && v >= 0.0;
    }
    std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    const auto a = fuse_patch(model, z, q);
    const auto b = fuse_patch(model, z, q.gather_rows(perm));
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    out.push_back(check("fusion weights simplex and order invariance",
                        nonneg && std::abs(sum - 1.0) <= 1e-12 && d <= 1e-9, "max diff " + fmt(d)));
  }

  {
    const Mat a = random_mat(30, 2, rng);
    const double self = mmd_rbf(a, a);
    out.push_back(check("mmd of a sample with itself", std::abs(self) <= 1e-12, fmt(self)));
  }
  return out;
}

}  // namespace spmu
