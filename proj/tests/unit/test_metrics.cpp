#include <doctest.h>

#include <cmath>

#include "spmu/data/dataset.hpp"
#include "spmu/metrics/metrics.hpp"
#include "spmu/metrics/report.hpp"
#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/rng.hpp"
#include "spmu/spm/reduce.hpp"
#include "spmu/unlearn/deletion.hpp"
#include "spmu/unlearn/parametric.hpp"

using namespace spmu;
using nlohmann::json;

namespace {

Mat random_proba(std::size_t n, std::size_t c, Rng& rng, double temperature = 2.0) {
  Mat p(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(c);
    for (double& v : logits) v = rng.normal() * temperature;
    const auto s = softmax(logits);
    std::copy(s.begin(), s.end(), p.row(i).begin());
  }
  return p;
}

std::vector<std::size_t> random_labels(std::size_t n, std::size_t c, Rng& rng) {
  std::vector<std::size_t> y(n);
  for (auto& v : y) v = rng.below(c);
  return y;
}

}  // namespace

TEST_CASE("accuracy gap") {
  const Mat right = Mat::from_rows({{0.9, 0.1}, {0.2, 0.8}});
  const Mat wrong = Mat::from_rows({{0.1, 0.9}, {0.8, 0.2}});
  const std::vector<std::size_t> y{0, 1};
  CHECK(delta_acc(right, right, y) == 0.0);
  CHECK(delta_acc(right, wrong, y) == 1.0);

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat a = random_proba(30, 3, rng), b = random_proba(30, 3, rng);
    const auto lab = random_labels(30, 3, rng);
    double hits_a = 0, hits_b = 0;
    for (std::size_t i = 0; i < 30; ++i) {
      hits_a += argmax(a.row(i)) == lab[i];
      hits_b += argmax(b.row(i)) == lab[i];
    }
    CHECK(delta_acc(a, b, lab) == doctest::Approx(std::abs(hits_a - hits_b) / 30.0).epsilon(1e-15));
  }
}

TEST_CASE("hard prediction gap") {
  const Mat a = Mat::from_rows({{0.9, 0.1}, {0.3, 0.7}});
  const Mat swapped = Mat::from_rows({{0.1, 0.9}, {0.7, 0.3}});
  CHECK(pg_hard(a, a) == 0.0);
  CHECK(pg_hard(a, swapped) == 1.0);

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat u = random_proba(25, 4, rng), o = random_proba(25, 4, rng);
    double diff = 0;
    for (std::size_t i = 0; i < 25; ++i) diff += argmax(u.row(i)) != argmax(o.row(i));
    CHECK(pg_hard(u, o) == doctest::Approx(diff / 25.0).epsilon(1e-15));
    CHECK(pg_hard(u, o) == pg_hard(o, u));
  }
}

TEST_CASE("soft prediction gap") {
  const Mat u = Mat::from_rows({{1.0, 0.0}}), o = Mat::from_rows({{0.5, 0.5}});
  CHECK(pg_soft(u, u) == 0.0);
  CHECK(pg_soft(u, o) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(pg_soft(u, o) != pg_soft(o, u));

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat a = random_proba(20, 3, rng), b = random_proba(20, 3, rng);
    long double ref = 0;
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t c = 0; c < 3; ++c) ref += a(i, c) * std::log(static_cast<long double>(a(i, c)) / b(i, c));
    CHECK(std::abs(pg_soft(a, b) - static_cast<double>(ref / 20)) <= 1e-14);
  }
}

TEST_CASE("bound chain") {
  Rng rng(4);
  const Mat p = random_proba(10, 3, rng);
  const auto y = random_labels(10, 3, rng);
  const Claim1 same = claim1_check(p, p, y);
  CHECK(same.delta_acc == 0.0);
  CHECK(same.pg_h == 0.0);
  CHECK(same.pg_s == 0.0);
  CHECK(same.bound == 0.0);
  CHECK(same.gamma_min == doctest::Approx(oracle_margin(p)));
  CHECK(same.holds);

  const Claim1 hand =
      claim1_check(Mat::from_rows({{0.2, 0.8}}), Mat::from_rows({{0.8, 0.2}}), std::vector<std::size_t>{0});
  CHECK(hand.delta_acc == 1.0);
  CHECK(hand.pg_h == 1.0);
  CHECK(std::abs(hand.pg_s - 0.8317766166719343713) <= 1e-14);
  CHECK(std::abs(hand.gamma_min - 0.6) <= 1e-15);
  CHECK(std::abs(hand.bound - 2.1496467625479700495) <= 1e-13);
  CHECK(hand.holds);

  const Claim1 tied =
      claim1_check(Mat::from_rows({{0.6, 0.4}}), Mat::from_rows({{0.5, 0.5}}), std::vector<std::size_t>{0});
  CHECK_FALSE(tied.applicable);
  CHECK_FALSE(tied.holds);
}

TEST_CASE("accuracy gap never exceeds the hard gap") {
  Rng rng(44);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(400);
    const Mat a = random_proba(n, 2, rng), b = random_proba(n, 2, rng);
    const auto y = random_labels(n, 2, rng);
    CHECK(delta_acc(a, b, y) <= pg_hard(a, b));
  }
  // 15/216 - 14/216 rounds above 1/216
  std::vector<std::size_t> y(216, 0);
  Mat a(216, 2), b(216, 2);
  for (std::size_t i = 0; i < 216; ++i) {
    a(i, i < 15 ? 0 : 1) = 1.0;
    b(i, i < 14 ? 0 : 1) = 1.0;
  }
  CHECK(delta_acc(a, b, y) == 1.0 / 216.0);
}

TEST_CASE("Pinsker inequality on random simplex pairs") {
  Rng rng(5);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const Mat pq = random_proba(2, n, rng, 3.0);
    double l1 = 0;
    for (std::size_t c = 0; c < n; ++c) l1 += std::abs(pq(0, c) - pq(1, c));
    violations += l1 > std::sqrt(2.0 * kl_div(pq.row(0), pq.row(1))) + 1e-12;
  }
  CHECK(violations == 0);
}

TEST_CASE("split gaps") {
  const LabeledDataset ds = gen_blobs(3, 30, Mat::from_rows({{-2, 0}, {2, 0}, {0, 2.5}}), 0.4, 6);
  const Split s = split(ds, 0.2, 7);
  SpmConfig cfg;
  cfg.num_classes = 3;
  cfg.epochs = 20;
  std::vector<std::size_t> class0;
  for (std::size_t i = 0; i < s.train.size(); ++i)
    if (s.train.y[i] == 0) class0.push_back(i);
  const SpmClassifier m = fit(cfg, s.train, 8);
  const SpmPredictor base(m, encode_set(m, s.train));
  const SpmPredictor del = test_time_delete(base, class0).predictor;
  const SpmPredictor orc = retrain_oracle(cfg, s.train, class0, 8).predictor;
  auto fd = [&](const Mat& x) { return del.predict_proba(x); };
  auto fo = [&](const Mat& x) { return orc.predict_proba(x); };
  const SplitGaps same = delta_ua_ra_ta(fo, fo, s.train, class0, s.test);
  CHECK(*same.ua == 0.0);
  CHECK(*same.ra == 0.0);
  CHECK(*same.ta == 0.0);
  const SplitGaps g = delta_ua_ra_ta(fd, fo, s.train, class0, s.test);
  CHECK(*g.ua == 0.0);
  CHECK(*g.acc_u == 0.0);

  ParametricConfig pc;
  pc.num_classes = 3;
  pc.epochs = 20;
  const ParametricClassifier pm = fit_parametric(pc, s.train, 9);
  const BaselineOutcome ga = unlearn_ga(pm, subset(s.train, class0), 50, 1e-2);
  auto fg = [&](const Mat& x) { return ga.model.predict_proba(x); };
  CHECK(*delta_ua_ra_ta(fg, fo, s.train, class0, s.test).ra > 0.0);
}

TEST_CASE("mmd") {
  Rng rng(10);
  Mat a(200, 2), a2(200, 2), b(200, 2);
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t d = 0; d < 2; ++d) {
      a(i, d) = rng.normal();
      a2(i, d) = rng.normal();
      b(i, d) = 10.0 + rng.normal();
    }
  CHECK(std::abs(mmd_rbf(a, a)) <= 1e-9);
  CHECK(mmd_rbf(a, b) > 10.0 * std::abs(mmd_rbf(a, a2)));
  CHECK(median_bandwidth(a, b) > 0.0);
  const Mat small = a.gather_rows(std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(std::isfinite(mmd_rbf(small, b)));
}

TEST_CASE("generative unlearning accuracy") {
  const Mat always0 = Mat::from_rows({{1, 0, 0}, {0.9, 0.05, 0.05}});
  CHECK(gen_ua(always0, 0) == 0.0);
  CHECK(gen_ua(always0, 1) == 1.0);
}

TEST_CASE("mean and sample std") {
  const std::vector<double> v{1, 2, 3, 4};
  const MeanStd ms = mean_std(v);
  CHECK(ms.mean == 2.5);
  CHECK(ms.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(mean_std(std::vector<double>{7}).std == 0.0);
}

TEST_CASE("table rows and aggregation") {
  const json report = json::parse(R"({"runs": [
    {"seed": 1, "methods": [{"method": "deletion", "pg_h": 0.1, "pg_s": 0.2, "seconds": 0.5,
                             "delta": {"ua": 0.0, "ra": 0.1, "ta": 0.2}}]},
    {"seed": 2, "methods": [{"method": "deletion", "pg_h": 0.3, "pg_s": 0.4, "seconds": 1.5,
                             "delta": {"ua": 0.0, "ra": 0.3, "ta": 0.4}}]}]})");
  const auto rows = table_rows(report);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].seed == "1");
  const auto agg = aggregate_rows(rows);
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].seed == "mean");
  CHECK(*agg[0].pg_h == doctest::Approx(0.2));
  CHECK(*agg[0].time_mu == doctest::Approx(1.0));
  CHECK(agg[1].seed == "std");
  CHECK(*agg[1].pg_h == doctest::Approx(std::sqrt(0.02)));
  CHECK(csv_line(rows[0]) == "deletion,1,0.1,0.2,0,0.1,0.2,0.5");

  const json one = json::parse(R"({"runs": [{"seed": 3, "methods": [{"method": "x", "seconds": 2}]}]})");
  const auto single = table_rows(one);
  REQUIRE(single.size() == 1);
  CHECK(csv_line(single[0]) == "x,3,,,,,,2");
  CHECK(aggregate_rows(single).size() == 2);

  CHECK_THROWS_AS(table_rows(json::parse(R"({"foo": 1})")), ValidationError);
  CHECK_THROWS_AS(table_rows(json::parse(R"({"runs": [{"seed": 1}]})")), ValidationError);
}
