#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spmu/data/dataset.hpp"
#include "spmu/data/forget.hpp"
#include "spmu/metrics/metrics.hpp"
#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/rng.hpp"
#include "spmu/spm/reduce.hpp"
#include "spmu/unlearn/deletion.hpp"
#include "spmu/unlearn/knn.hpp"
#include "spmu/unlearn/parametric.hpp"

using namespace spmu;

namespace {

Mat random_mat(std::size_t r, std::size_t c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

LabeledDataset three_blobs(std::size_t per_class, std::uint64_t seed) {
  return gen_blobs(3, per_class, Mat::from_rows({{-2, 0}, {2, 0}, {0, 2.5}}), 0.4, seed);
}

SpmConfig quick_config(std::size_t classes) {
  SpmConfig c;
  c.num_classes = classes;
  c.hidden = {16};
  c.embed_dim = 8;
  c.attn_dim = 8;
  c.epochs = 10;
  return c;
}

template <class M>
bool same_parameters(const M& a, const M& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("instance deletion") {
  Rng rng(1);
  const LabeledDataset ds = three_blobs(10, 1);
  const SpmClassifier m = init_classifier(quick_config(3), 2);
  const InstanceSet s = encode_set(m, ds);
  const InstanceSet same = delete_instances(s, std::vector<std::size_t>{});
  CHECK(same.embeddings == s.embeddings);
  CHECK(same.source_ids == s.source_ids);

  const std::vector<std::size_t> forget{0, 4, 29};
  const InstanceSet d = delete_instances(s, forget);
  CHECK(d.size() == 27);
  for (auto id : d.source_ids) CHECK(std::find(forget.begin(), forget.end(), id) == forget.end());
}

TEST_CASE("clustering deletion") {
  const LabeledDataset ds = three_blobs(10, 3);
  const SpmClassifier m = init_classifier(quick_config(3), 4);
  const ReducedSet r = reduce_clustering(m, ds);
  std::vector<std::size_t> class0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.y[i] == 0) class0.push_back(i);
  const ReducedSet gone = delete_instances(r, class0);
  CHECK(gone.rows.size() == 2);
  for (auto id : gone.rows.source_ids) CHECK(id != 0);

  const std::vector<std::size_t> part(class0.begin(), class0.begin() + 4);
  const ReducedSet partial = delete_instances(r, part);
  const InstanceSet all = encode_set(m, ds);
  std::vector<double> mean(all.embeddings.cols(), 0.0);
  double n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.y[i] != 0 || std::find(part.begin(), part.end(), i) != part.end()) continue;
    n += 1;
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += all.embeddings(i, d);
  }
  REQUIRE(partial.rows.source_ids[0] == 0);
  for (std::size_t d = 0; d < mean.size(); ++d) CHECK(std::abs(partial.rows.embeddings(0, d) - mean[d] / n) <= 1e-12);
}

TEST_CASE("test-time deletion leaves weights alone and nullifies") {
  const LabeledDataset ds = three_blobs(30, 5);
  const SpmClassifier m = fit(quick_config(3), ds, 6);
  std::vector<std::size_t> class1;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.y[i] == 1) class1.push_back(i);
  Rng rng(7);
  const Mat q = random_mat(200, 2, rng) * 3.0;
  for (Reduction mode : {Reduction::full, Reduction::retrieval, Reduction::clustering}) {
    const SpmPredictor base(m, encode_set(m, ds), mode, mode == Reduction::retrieval ? 8 : 0);
    const auto r = test_time_delete(base, class1);
    CHECK(r.method == "deletion");
    CHECK(same_parameters(r.predictor.model(), m));
    const Mat p = r.predictor.predict_proba(q);
    for (std::size_t i = 0; i < q.rows(); ++i) CHECK(p(i, 1) <= 1e-15);
  }
}

TEST_CASE("retrain oracle") {
  const LabeledDataset ds = three_blobs(30, 8);
  const SpmConfig cfg = quick_config(3);
  const auto same = retrain_oracle(cfg, ds, std::vector<std::size_t>{}, 9);
  CHECK(same_parameters(same.predictor.model(), fit(cfg, ds, 9)));

  std::vector<std::size_t> class0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.y[i] == 0) class0.push_back(i);
  const auto o = retrain_oracle(cfg, ds, class0, 9);
  CHECK(o.method == "oracle");
  Rng rng(10);
  Mat region = random_mat(100, 2, rng) * 0.4;
  for (std::size_t i = 0; i < 100; ++i) region(i, 0) -= 2.0;
  const Mat p = o.predictor.predict_proba(region);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    CHECK(p(i, 0) <= 1e-15);
    CHECK(argmax(p.row(i)) != 0);
  }
  for (auto id : o.predictor.members().source_ids) CHECK(ds.y[id] != 0);

  const SpmPredictor base(same.predictor.model(), encode_set(same.predictor.model(), ds));
  const auto d = test_time_delete(base, class0);
  CHECK(o.seconds > 100.0 * d.seconds);
}

TEST_CASE("gradient ascent baseline") {
  const LabeledDataset ds = gen_moons(100, 0.1, 1);
  ParametricConfig cfg;
  cfg.epochs = 30;
  const ParametricClassifier m = fit_parametric(cfg, ds, 2);
  const auto forget = resolve_forget(ds, ForgetSpec::random(0.1, 3));
  const LabeledDataset fs = subset(ds, forget);
  const LabeledDataset rs = retain_set(ds, forget);

  const BaselineOutcome none = unlearn_ga(m, fs, 0);
  CHECK(none.steps_done == 0);
  CHECK(same_parameters(none.model, m));

  const BaselineOutcome ga = unlearn_ga(m, fs, 50, 1e-2);
  const double before = accuracy(m.predict_proba(fs.x), fs.y);
  CHECK(accuracy(ga.model.predict_proba(fs.x), fs.y) < before);
  CHECK(accuracy(ga.model.predict_proba(rs.x), rs.y) < accuracy(m.predict_proba(rs.x), rs.y));

  const BaselineOutcome ft0 = unlearn_ft(m, rs, 0);
  CHECK(same_parameters(ft0.model, m));
  const BaselineOutcome ft = unlearn_ft(m, rs, 200, 1e-3, 3);
  CHECK(accuracy(ft.model.predict_proba(rs.x), rs.y) >= accuracy(m.predict_proba(rs.x), rs.y) - 0.01);
}

TEST_CASE("parametric gradients") {
  Rng rng(4);
  ParametricConfig cfg;
  cfg.num_classes = 3;
  cfg.hidden = {5};
  const ParametricClassifier m = init_parametric(cfg, 5);
  const Mat x = random_mat(6, 2, rng);
  const std::vector<std::size_t> y{0, 1, 2, 2, 1, 0};
  double l = 0;
  const auto g = parametric_grad(m, x, y, &l);
  CHECK(l == doctest::Approx(parametric_loss(m, x, y)).epsilon(1e-14));
  ParametricClassifier probe = m;
  const double h = 1e-6;
  double worst = 0;
  auto params = probe.parameters();
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t k = 0; k < params[p]->size(); ++k) {
      const double keep = params[p]->values()[k];
      params[p]->values()[k] = keep + h;
      const double up = parametric_loss(probe, x, y);
      params[p]->values()[k] = keep - h;
      const double down = parametric_loss(probe, x, y);
      params[p]->values()[k] = keep;
      const double fd = (up - down) / (2 * h), an = g[p].values()[k];
      worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
    }
  CHECK(worst <= 1e-6);
}

TEST_CASE("knn examples") {
  LabeledDataset ds;
  ds.x = Mat::from_rows({{0, 0}, {1, 0}, {0, 1}, {5, 5}});
  ds.y = {0, 0, 1, 1};
  ds.num_classes = 2;
  const KnnIndex idx = build_knn(ds);
  const auto p1 = knn_predict(idx, ds.x.row(2), 1);
  CHECK(p1 == std::vector<double>{0, 1});
  const auto p3 = knn_predict(idx, std::vector<double>{0.1, 0.1}, 3);
  CHECK(p3[0] == doctest::Approx(2.0 / 3.0));
  CHECK(p3[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("knn deletion equals rebuild") {
  Rng rng(6);
  const LabeledDataset ds = three_blobs(20, 7);
  const KnnIndex full = build_knn(ds);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> forget = rng.sample_without_replacement(ds.size(), 1 + rng.below(20));
    std::sort(forget.begin(), forget.end());
    const auto keep = complement(ds.size(), forget);
    const Mat q = random_mat(20, 2, rng) * 3.0;
    const std::size_t k = 1 + rng.below(15);
    CHECK(knn_predict_proba(knn_delete(full, forget), q, k) == knn_predict_proba(build_knn(ds, keep), q, k));
  }
}
