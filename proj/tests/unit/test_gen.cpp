#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spmu/cli/selftest.hpp"
#include "spmu/data/dataset.hpp"
#include "spmu/gen/denoiser.hpp"
#include "spmu/gen/gmm.hpp"
#include "spmu/gen/schedule.hpp"
#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/rng.hpp"

using namespace spmu;

namespace {

Mat random_mat(std::size_t r, std::size_t c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

GenConfig small_config() {
  GenConfig c;
  c.down_hidden = {8};
  c.up_hidden = {8};
  c.width = 6;
  c.time_dim = 4;
  c.steps_t = 25;
  return c;
}

SpmDenoiser random_denoiser(std::uint64_t seed) {
  SpmDenoiser m = init_denoiser(small_config(), seed);
  Rng rng(seed + 1);
  // nonzero bias so the ReLU in the scorer is exercised on both sides
  for (double& v : m.attn_bias.values()) v = rng.normal();
  return m;
}

// w . relu(z W_q + s_j W_k + b), softmax over j, then sum_j alpha_j s_j W_k
std::vector<double> bahdanau_oracle(const SpmDenoiser& m, std::span<const double> z, const Mat& s) {
  const std::size_t d = m.config.width;
  std::vector<double> scores(s.rows(), 0.0);
  std::vector<std::vector<double>> keys(s.rows(), std::vector<double>(d, 0.0));
  for (std::size_t j = 0; j < s.rows(); ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      double q = 0;
      for (std::size_t e = 0; e < d; ++e) {
        q += z[e] * m.w_query(e, c);
        keys[j][c] += s(j, e) * m.w_key(e, c);
      }
      scores[j] += m.attn_w(c, 0) * std::max(0.0, q + keys[j][c] + m.attn_bias(0, c));
    }
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0;
  for (double& v : scores) sum += (v = std::exp(v - mx));
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < s.rows(); ++j)
    for (std::size_t c = 0; c < d; ++c) out[c] += scores[j] / sum * keys[j][c];
  return out;
}

PatchSet random_patches(const SpmDenoiser& m, std::size_t n, Rng& rng) {
  std::vector<std::size_t> labels(n), ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % m.config.num_classes;
    ids[i] = i;
  }
  return encode_patches(m, random_mat(n, m.config.input_dim, rng), labels, ids);
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("linear schedule") {
  const NoiseSchedule s = linear_schedule(50);
  CHECK(s.steps() == 50);
  CHECK(s.beta_at(1) == doctest::Approx(0.002).epsilon(1e-14));
  CHECK(s.beta_at(50) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(std::abs(s.alpha_bar_at(25) - 0.069088983062072695124) <= 1e-15);
  CHECK(std::abs(s.alpha_bar_at(50) - 7.7447656992267373096e-6) <= 1e-18);
  CHECK(s.posterior_variance(1) == 0.0);
  CHECK(std::abs(s.posterior_variance(25) - 0.19335439225191895904) <= 1e-15);
  for (std::size_t t = 2; t <= 50; ++t) CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
  CHECK_THROWS_AS(linear_schedule(10), DomainError);
  CHECK_THROWS_AS(schedule_from_betas({0.2, 0.1}), DomainError);
}

TEST_CASE("forward diffusion") {
  const std::vector<double> x0{0.5, -1.25}, eps{0.3, 2.0};
  const NoiseSchedule near_clean = schedule_from_betas({1e-300, 2e-300});
  const auto a = forward_diffuse(x0, 1, eps, near_clean);
  CHECK(a == x0);
  const NoiseSchedule near_noise = schedule_from_betas({0.999999999, 1.0 - 1e-12});
  const auto b = forward_diffuse(x0, 2, eps, near_noise);
  CHECK(max_diff(b, eps) <= 1e-9);
  const auto m = forward_diffuse(x0, 25, eps, linear_schedule(50));
  CHECK(std::abs(m[0] - 0.42087510648954514811) <= 1e-15);
  CHECK(std::abs(m[1] - 1.6011148108662577059) <= 1e-15);
  CHECK_THROWS_AS(forward_diffuse(x0, 0, eps, near_clean), DomainError);
  CHECK_THROWS_AS(forward_diffuse(x0, 3, eps, near_clean), DomainError);
}

TEST_CASE("sinusoidal step features") {
  const auto e = sinusoidal_embedding(3, 4);
  CHECK(std::abs(e[0] - 0.1411200080598672221) <= 1e-15);
  CHECK(std::abs(e[1] - 0.029995500202495660769) <= 1e-15);
  CHECK(std::abs(e[2] - -0.98999249660044545727) <= 1e-15);
  CHECK(std::abs(e[3] - 0.99955003374898751627) <= 1e-15);
}

TEST_CASE("fuse_patch examples") {
  Rng rng(2);
  const SpmDenoiser m = random_denoiser(3);
  std::vector<double> z(6);
  for (double& v : z) v = rng.normal();

  Mat same(4, 6);
  const Mat one = random_mat(1, 6, rng);
  for (std::size_t j = 0; j < 4; ++j) std::copy(one.row(0).begin(), one.row(0).end(), same.row(j).begin());
  for (double w : fusion_weights(m, z, same)) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));
  const Mat key = matmul(one, m.w_key);
  CHECK(max_diff(fuse_patch(m, z, same), key.row(0)) <= 1e-14);

  std::vector<double> z2(6);
  for (double& v : z2) v = rng.normal() * 10;
  CHECK(max_diff(fuse_patch(m, z, one), key.row(0)) <= 1e-15);
  CHECK(max_diff(fuse_patch(m, z2, one), key.row(0)) <= 1e-15);

  for (int trial = 0; trial < 20; ++trial) {
    const Mat q = random_mat(4, 6, rng);
    CHECK(max_diff(fuse_patch(m, z, q), bahdanau_oracle(m, z, q)) <= 1e-13);
  }
  CHECK_THROWS_AS(fuse_patch(m, z, Mat(0, 6)), EmptySetError);
}

TEST_CASE("fusion weights are a permutation-invariant simplex") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const SpmDenoiser m = random_denoiser(rng.next_u64());
    std::vector<double> z(6);
    for (double& v : z) v = rng.normal();
    const std::size_t n = 1 + rng.below(10);
    const Mat q = random_mat(n, 6, rng);
    const auto w = fusion_weights(m, z, q);
    double sum = 0;
    for (double v : w) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    CHECK(max_diff(fuse_patch(m, z, q), fuse_patch(m, z, q.gather_rows(perm))) <= 1e-9);
  }
}

TEST_CASE("denoise depends only on elements that answer the class") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const SpmDenoiser m = random_denoiser(rng.next_u64());
    const PatchSet s = random_patches(m, 12, rng);
    const std::vector<double> x{rng.normal(), rng.normal()};
    const std::size_t t = 1 + rng.below(25), c = rng.below(3);
    const auto base = denoise(m, x, t, c, s);

    PatchSet corrupted = s;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s.labels[j] != c)
        for (double& v : corrupted.embeddings.row(j)) v = 1e3 * rng.normal();
    CHECK(denoise(m, x, t, c, corrupted) == base);

    std::vector<std::size_t> perm(12);
    for (std::size_t i = 0; i < 12; ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    PatchSet shuffled = s;
    shuffled.embeddings = s.embeddings.gather_rows(perm);
    for (std::size_t i = 0; i < 12; ++i) {
      shuffled.labels[i] = s.labels[perm[i]];
      shuffled.source_ids[i] = s.source_ids[perm[i]];
    }
    CHECK(max_diff(denoise(m, x, t, c, shuffled), base) <= 1e-9);

    const std::size_t self = s.rows_for(c).front();
    PatchSet self_corrupt = s;
    for (double& v : self_corrupt.embeddings.row(self)) v = 1e3;
    CHECK(denoise(m, x, t, c, s, s.source_ids[self]) == denoise(m, x, t, c, self_corrupt, s.source_ids[self]));

    const Mat xb = random_mat(3, 2, rng);
    const Mat batch = denoise_batch(m, xb, t, c, s);
    for (std::size_t i = 0; i < 3; ++i) CHECK(max_diff(batch.row(i), denoise(m, xb.row(i), t, c, s)) <= 1e-12);
  }
}

TEST_CASE("training loss ignores the excluded self element") {
  Rng rng(6);
  const SpmDenoiser m = random_denoiser(7);
  GenBatch b{random_mat(3, 2, rng), {3, 10, 20}, random_mat(3, 2, rng), {0, 1, 2}, {100, std::nullopt, 102}};
  GenSetBatch s{random_mat(6, 2, rng), {0, 1, 2, 0, 1, 2}, {100, 101, 102, 103, 104, 105}};
  const double before = gen_loss(m, b, s);
  GenSetBatch corrupted = s;
  for (double& v : corrupted.x.row(0)) v = 50.0;
  for (double& v : corrupted.x.row(2)) v = -50.0;
  CHECK(gen_loss(m, b, corrupted) == before);
}

TEST_CASE("denoiser gradients") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(gen_grad_error(seed) <= 1e-4);
}

TEST_CASE("conditioning needs matching elements") {
  Rng rng(8);
  const SpmDenoiser m = random_denoiser(9);
  PatchSet s = random_patches(m, 6, rng);
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s.labels[j] != 2) keep.push_back(j);
  PatchSet no2 = s;
  no2.embeddings = s.embeddings.gather_rows(keep);
  no2.labels.clear();
  no2.source_ids.clear();
  for (auto j : keep) {
    no2.labels.push_back(s.labels[j]);
    no2.source_ids.push_back(s.source_ids[j]);
  }
  const std::vector<double> x{0.1, 0.2};
  CHECK_THROWS_AS(denoise(m, x, 5, 2, no2), ConditioningError);
  CHECK(sample(m, 2, no2, 0, 1).rows() == 0);
  CHECK(sample(m, 0, s, 4, 11) == sample(m, 0, s, 4, 11));
}

TEST_CASE("class substitution") {
  Rng rng(10);
  const SpmDenoiser m = random_denoiser(11);
  GenConfig two_cfg = small_config();
  two_cfg.num_classes = 2;
  const SpmDenoiser m2 = init_denoiser(two_cfg, 12);
  const PatchSet s2 = random_patches(m2, 8, rng);
  const PatchSet d2 = unlearn_substitute(s2, 0, 1);
  for (std::size_t j : d2.rows_for(0)) CHECK(d2.labels[j] == 1);
  CHECK(d2.rows_for(0) == d2.rows_for(1));

  const PatchSet s = random_patches(m, 9, rng);
  PatchSet absent = unlearn_substitute(s, 0, 1);
  const PatchSet again = unlearn_substitute(absent, 0, 2);
  CHECK(again.embeddings == absent.embeddings);
  CHECK(again.serve == absent.serve);

  CHECK(std::count(absent.labels.begin(), absent.labels.end(), std::size_t{0}) == 0);
  CHECK(absent.size() == 6);
  CHECK(absent.rows_for(0) == absent.rows_for(1));

  const PatchSet redirected = redirect_class(s, 0, 1);
  CHECK(redirected.rows_for(0) == s.rows_for(1));
  CHECK_THROWS_AS(unlearn_substitute(s, 1, 1), DomainError);
}

TEST_CASE("fit_gen learns a two-class mixture") {
  const Mat centers = Mat::from_rows({{-2, 0}, {2, 0}});
  const double sigma = 0.3;
  LabeledDataset ds = gen_blobs(2, 200, centers, sigma, 1);
  GenConfig cfg;
  cfg.num_classes = 2;
  cfg.train_steps = 500;
  const SpmDenoiser m = fit_gen(cfg, ds, 2);
  const PatchSet set = encode_patches(m, ds);
  for (std::size_t c = 0; c < 2; ++c) {
    const Mat xs = sample(m, c, set, 200, 3 + c);
    std::size_t inside = 0;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.rows(); ++i) {
      inside += std::sqrt(squared_distance(xs.row(i), centers.row(c))) <= 3 * sigma;
      mx += xs(i, 0) / 200.0;
      my += xs(i, 1) / 200.0;
    }
    CHECK(static_cast<double>(inside) / 200.0 >= 0.9);
    CHECK(std::hypot(mx - centers(c, 0), my - centers(c, 1)) <= 0.5);
  }

  GenConfig quick = cfg;
  quick.train_steps = 5;
  const SpmDenoiser a = fit_gen(quick, ds, 9), b = fit_gen(quick, ds, 9);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) CHECK(*a.parameters()[i] == *b.parameters()[i]);
}

TEST_CASE("gmm closed forms and separation") {
  Rng rng(1);
  const Mat x = random_mat(40, 3, rng);
  const GaussianMixture one = gmm_fit(x, 1, 5, 2);
  for (std::size_t d = 0; d < 3; ++d) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 40; ++i) mean += x(i, d) / 40.0;
    for (std::size_t i = 0; i < 40; ++i) var += (x(i, d) - mean) * (x(i, d) - mean) / 40.0;
    CHECK(std::abs(one.means(0, d) - mean) <= 1e-12);
    CHECK(std::abs(one.variances(0, d) - var) <= 1e-12);
  }

  const LabeledDataset two = gen_blobs(2, 100, Mat::from_rows({{-5, 0}, {5, 0}}), 0.5, 3);
  const GaussianMixture g = gmm_fit(two.x, 2, 50, 4);
  for (std::size_t c = 0; c < 2; ++c) {
    double cx = 0, cy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < two.size(); ++i)
      if (two.y[i] == c) {
        cx += two.x(i, 0);
        cy += two.x(i, 1);
        ++n;
      }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    double best = 1e9;
    for (std::size_t k = 0; k < 2; ++k) best = std::min(best, std::hypot(g.means(k, 0) - cx, g.means(k, 1) - cy));
    CHECK(best <= 0.1);
  }
  for (std::size_t i = 1; i < g.log_likelihood.size(); ++i)
    CHECK(g.log_likelihood[i] >= g.log_likelihood[i - 1] - 1e-9);
  for (double v : g.variances.values()) CHECK(v >= kVarianceFloor);
  CHECK(gmm_sample(g, 0, 1).rows() == 0);
  CHECK(gmm_sample(g, 5, 7) == gmm_sample(g, 5, 7));
}
