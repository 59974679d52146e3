#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spmu/cli/experiment.hpp"
#include "spmu/cli/selftest.hpp"
#include "spmu/data/dataset.hpp"
#include "spmu/data/label_perm.hpp"
#include "spmu/gen/denoiser.hpp"
#include "spmu/gen/gmm.hpp"
#include "spmu/io/checkpoint.hpp"
#include "spmu/metrics/metrics.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/rng.hpp"
#include "spmu/spm/reduce.hpp"
#include "spmu/unlearn/deletion.hpp"
#include "spmu/unlearn/knn.hpp"

using namespace spmu;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kAc1GapMax = 0.05;
constexpr double kAc1RatioMax = 0.25;
constexpr double kAc1SecondsMax = 120.0;
constexpr double kAc2ProbMax = 1e-15;
constexpr double kAc4GradMax = 1e-4;
constexpr std::size_t kAc4Seeds = 20;
constexpr double kAc5PermMax = 1e-9;
constexpr double kAc5LabelMax = 1e-12;
constexpr std::size_t kAc6Pairs = 100;
constexpr double kAc7RatioMax = 0.01;
constexpr double kAc8UaGapMax = 0.05;
constexpr double kAc10Tol = 1e-9;
constexpr std::size_t kAc10Inits = 50;
constexpr std::size_t kPinskerTrials = 10000;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Timing {
  std::string run;
  double deletion = 0.0;
  double oracle = 0.0;
};

struct Chain {
  std::string run;
  Claim1 c;
};

std::vector<Timing> timings;
std::vector<Chain> chains;
int failures = 0;

std::vector<std::pair<int, std::string>> lines;

void verdict(int id, bool pass, const std::string& detail) {
  const std::string line = std::string(pass ? "PASS" : "FAIL") + " AC" + std::to_string(id) + " " + detail;
  lines.emplace_back(id, line);
  failures += !pass;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

json load_config(const std::string& name) {
  return read_json_file(fs::path(SPMU_SOURCE_DIR) / "configs" / (name + ".json"));
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "spmu_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Claim1 chain_from(const json& j) {
  Claim1 c;
  c.delta_acc = j.at("delta_acc");
  c.pg_h = j.at("pg_h");
  c.pg_s = j.at("pg_s");
  c.bound = j.at("bound");
  c.gamma_min = j.at("gamma_min");
  c.applicable = j.at("applicable");
  c.holds = j.at("holds");
  return c;
}

// Files the chains and deletion timings of a classifier report.
void harvest(const std::string& tag, const json& report, bool timed) {
  for (const json& run : report.at("runs")) {
    const std::string where = tag + "/seed" + std::to_string(run.at("seed").get<std::uint64_t>());
    for (const json& m : run.at("methods")) {
      const std::string name = m.at("method");
      if (name == "base") continue;
      if (m.contains("bound_chain")) chains.push_back({where + "/" + name, chain_from(m.at("bound_chain"))});
      if (m.contains("retain_bound_chain"))
        chains.push_back({where + "/" + name + "/retain", chain_from(m.at("retain_bound_chain"))});
      if (timed && name == "deletion")
        timings.push_back({where, m.at("seconds"), run.at("oracle_seconds")});
    }
  }
}

json run_named(const std::string& name, json cfg) {
  return run_experiment(parse_experiment(cfg), scratch(name));
}

LabeledDataset three_blobs(std::size_t per_class, std::uint64_t seed) {
  return gen_blobs(3, per_class, Mat::from_rows({{-2, 0}, {2, 0}, {0, 2.5}}), 0.4, seed);
}

Mat random_queries(std::size_t n, double scale, Rng& rng) {
  Mat q(n, 2);
  for (double& v : q.values()) v = scale * rng.normal();
  return q;
}

std::vector<std::size_t> rows_of_class(const LabeledDataset& ds, std::size_t c) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.y[i] == c) out.push_back(i);
  return out;
}

void ac1() {
  const json base_cfg = load_config("moons_spm");
  bool pass = true;
  std::string detail;
  json all = json::object({{"runs", json::array()}});
  for (const auto& seed : base_cfg.at("seeds")) {
    json cfg = base_cfg;
    cfg["seeds"] = json::array({seed});
    const auto t0 = Clock::now();
    const json report = run_named("ac1", cfg);
    const double secs = since(t0);
    const json& run = report.at("runs").at(0);
    all["runs"].push_back(run);
    double base_gap = 0, del_gap = 0;
    for (const json& m : run.at("methods")) {
      if (m.at("method") == "base") base_gap = m.at("grid_pg_h");
      if (m.at("method") == "deletion") del_gap = m.at("grid_pg_h");
    }
    const bool ok = del_gap <= kAc1GapMax && del_gap <= kAc1RatioMax * base_gap && secs <= kAc1SecondsMax;
    pass = pass && ok;
    detail += " seed" + seed.dump() + "{del=" + fmt("%.4f", del_gap) + " base=" + fmt("%.4f", base_gap) +
              " s=" + fmt("%.1f", secs) + "}";
  }
  harvest("moons_spm", all, true);
  verdict(1, pass, "grid PG_H vs oracle" + detail);
}

void ac2() {
  Rng rng(2024);
  double worst = 0;
  std::size_t cases = 0;
  for (std::uint64_t seed : {11u, 12u}) {
    const LabeledDataset ds = three_blobs(60, seed);
    SpmConfig cfg;
    cfg.num_classes = 3;
    cfg.epochs = 30;
    const SpmClassifier m = fit(cfg, ds, seed);
    const Mat q = random_queries(1000, 3.0, rng);
    for (std::size_t c = 0; c < 3; ++c) {
      const auto forget = rows_of_class(ds, c);
      for (Reduction mode : {Reduction::full, Reduction::retrieval, Reduction::clustering}) {
        const SpmPredictor base(m, encode_set(m, ds), mode, mode == Reduction::retrieval ? 16 : 0);
        const auto del = test_time_delete(base, forget);
        const Mat p = del.predictor.predict_proba(q);
        for (std::size_t i = 0; i < q.rows(); ++i) worst = std::max(worst, p(i, c));
        ++cases;
        if (mode != Reduction::full || c != 0) continue;
        const auto orc = retrain_oracle(cfg, ds, forget, seed, mode);
        const std::string where = "blobs/seed" + std::to_string(seed) + "/class" + std::to_string(c);
        timings.push_back({where, del.seconds, orc.seconds});
        const LabeledDataset test = three_blobs(30, seed + 100);
        chains.push_back({where, claim1_check(del.predictor.predict_proba(test.x),
                                              orc.predictor.predict_proba(test.x), test.y)});
      }
    }
  }
  verdict(2, worst <= kAc2ProbMax,
          "max deleted-class prob " + fmt("%.3g", worst) + " over " + std::to_string(cases) + " (model, class, mode)");
}

void ac3() {
  for (const char* name : {"moons_knn", "moons_parametric"}) harvest(name, run_named(name, load_config(name)), false);

  std::size_t applicable = 0, violations = 0;
  std::string first_bad;
  for (const Chain& ch : chains) {
    if (!ch.c.applicable) continue;
    ++applicable;
    if (!ch.c.holds) {
      ++violations;
      if (first_bad.empty()) first_bad = " first=" + ch.run;
    }
  }

  Rng rng(33);
  std::size_t pinsker_bad = 0;
  for (std::size_t trial = 0; trial < kPinskerTrials; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    std::vector<double> lp(n), lq(n);
    for (std::size_t i = 0; i < n; ++i) {
      lp[i] = 3.0 * rng.normal();
      lq[i] = 3.0 * rng.normal();
    }
    const auto p = softmax(lp), q = softmax(lq);
    double l1 = 0;
    for (std::size_t i = 0; i < n; ++i) l1 += std::abs(p[i] - q[i]);
    pinsker_bad += l1 > std::sqrt(2.0 * kl_div(p, q)) + 1e-12;
  }
  verdict(3, applicable > 0 && violations == 0 && pinsker_bad == 0,
          std::to_string(violations) + " violations in " + std::to_string(applicable) + " applicable pairs (" +
              std::to_string(chains.size()) + " total)" + first_bad + "; Pinsker " + std::to_string(pinsker_bad) +
              "/" + std::to_string(kPinskerTrials));
}

void ac4() {
  double spm_worst = 0, gen_worst = 0;
  for (std::uint64_t s = 1; s <= kAc4Seeds; ++s) {
    spm_worst = std::max(spm_worst, spm_grad_error(s));
    gen_worst = std::max(gen_worst, gen_grad_error(s));
  }
  verdict(4, spm_worst <= kAc4GradMax && gen_worst <= kAc4GradMax,
          "max rel error classifier " + fmt("%.3g", spm_worst) + " denoiser " + fmt("%.3g", gen_worst) + " over " +
              std::to_string(kAc4Seeds) + " seeds");
}

template <class Set>
Set shuffled(const Set& s, const std::vector<std::size_t>& order);

template <>
InstanceSet shuffled(const InstanceSet& s, const std::vector<std::size_t>& order) {
  InstanceSet out;
  out.embeddings = s.embeddings.gather_rows(order);
  out.labels = s.labels.gather_rows(order);
  for (auto i : order) out.source_ids.push_back(s.source_ids[i]);
  return out;
}

template <>
PatchSet shuffled(const PatchSet& s, const std::vector<std::size_t>& order) {
  PatchSet out;
  out.embeddings = s.embeddings.gather_rows(order);
  for (auto i : order) {
    out.labels.push_back(s.labels[i]);
    out.source_ids.push_back(s.source_ids[i]);
  }
  out.serve = s.serve;
  return out;
}

void ac5() {
  Rng rng(55);
  const LabeledDataset ds = three_blobs(50, 5);
  SpmConfig cfg;
  cfg.num_classes = 3;
  cfg.epochs = 10;
  const SpmClassifier m = fit(cfg, ds, 5);
  const InstanceSet set = encode_set(m, ds);
  const Mat q = random_queries(200, 3.0, rng);

  double perm = 0, label = 0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> order(set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    const InstanceSet ps = shuffled(set, order);
    const LabelPermutation pi = LabelPermutation::random(3, rng);
    InstanceSet ls = set;
    ls.labels = apply_label_perm(set.labels, pi);
    for (Reduction mode : {Reduction::full, Reduction::retrieval, Reduction::clustering}) {
      const std::size_t k = mode == Reduction::retrieval ? 16 : 0;
      const Mat p = SpmPredictor(m, set, mode, k).predict_proba(q);
      perm = std::max(perm, max_abs_diff(p, SpmPredictor(m, ps, mode, k).predict_proba(q)));
      const Mat pl = SpmPredictor(m, ls, mode, k).predict_proba(q);
      for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t c = 0; c < 3; ++c) label = std::max(label, std::abs(pl(i, pi(c)) - p(i, c)));
    }
  }

  GenConfig gc;
  gc.num_classes = 3;
  gc.train_steps = 100;
  const SpmDenoiser d = fit_gen(gc, ds, 6);
  const PatchSet patches = encode_patches(d, ds);
  double dperm = 0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> order(patches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    const PatchSet ps = shuffled(patches, order);
    for (std::size_t t : {1u, 10u, 25u, 50u})
      for (std::size_t c = 0; c < 3; ++c) {
        const Mat xt = random_queries(20, 1.5, rng);
        dperm = std::max(dperm, max_abs_diff(denoise_batch(d, xt, t, c, patches), denoise_batch(d, xt, t, c, ps)));
      }
  }
  verdict(5, perm <= kAc5PermMax && dperm <= kAc5PermMax && label <= kAc5LabelMax,
          "set permutation predict " + fmt("%.3g", perm) + " denoise " + fmt("%.3g", dperm) +
              "; label equivariance " + fmt("%.3g", label));
}

void ac6() {
  Rng rng(66);
  const LabeledDataset ds = append_cluster(gen_moons(150, 0.1, 6), std::vector<double>{-0.9, 1.2}, 0.15, 20, 1, 7);
  const KnnIndex full = build_knn(ds);
  std::size_t mismatches = 0;
  for (std::size_t trial = 0; trial < kAc6Pairs; ++trial) {
    auto forget = rng.sample_without_replacement(ds.size(), 1 + rng.below(ds.size() / 2));
    std::sort(forget.begin(), forget.end());
    const Mat q = random_queries(1, 1.5, rng);
    const std::size_t k = 1 + rng.below(25);
    mismatches += knn_predict_proba(knn_delete(full, forget), q, k) !=
                  knn_predict_proba(build_knn(ds, complement(ds.size(), forget)), q, k);
  }
  verdict(6, mismatches == 0,
          std::to_string(mismatches) + " mismatches in " + std::to_string(kAc6Pairs) + " (forget, query) pairs");
}

struct GenSummary {
  std::vector<double> ua_gap;
  std::vector<double> mmd_del, mmd_base;
};

GenSummary gen_runs(const std::string& tag, bool label_perm) {
  json cfg = load_config("blobs_gen");
  cfg["model"]["label_perm"] = label_perm;
  const json report = run_named(tag, cfg);
  GenSummary s;
  for (const json& run : report.at("runs")) {
    const json& g = run.at("gen");
    s.ua_gap.push_back(std::abs(g.at("ua").at("deletion").get<double>() - g.at("ua").at("oracle").get<double>()));
    s.mmd_del.push_back(g.at("mmd").at("deletion_vs_oracle"));
    s.mmd_base.push_back(g.at("mmd").at("base_vs_oracle"));
    const std::string where = tag + "/seed" + std::to_string(run.at("seed").get<std::uint64_t>());
    timings.push_back({where, run.at("methods").at(0).at("seconds"), run.at("oracle_seconds")});
  }
  return s;
}

GenSummary gen_on;

void ac8() {
  gen_on = gen_runs("blobs_gen", true);
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < gen_on.ua_gap.size(); ++i) {
    pass = pass && gen_on.ua_gap[i] <= kAc8UaGapMax && gen_on.mmd_del[i] < gen_on.mmd_base[i];
    detail += " {|dUA|=" + fmt("%.3f", gen_on.ua_gap[i]) + " mmd del=" + fmt("%.4f", gen_on.mmd_del[i]) +
              " base=" + fmt("%.4f", gen_on.mmd_base[i]) + "}";
  }
  verdict(8, pass && gen_on.ua_gap.size() == 3, "per seed" + detail);
}

void ac9() {
  const GenSummary off = gen_runs("blobs_gen_noperm", false);
  const double mean_on = mean_std(gen_on.ua_gap).mean, mean_off = mean_std(off.ua_gap).mean;
  verdict(9, mean_off > mean_on,
          "mean |UA - oracle UA| flag off " + fmt("%.3f", mean_off) + " vs on " + fmt("%.3f", mean_on));
}

void ac7() {
  double worst = 0;
  std::string where;
  for (const Timing& t : timings) {
    const double r = t.oracle > 0 ? t.deletion / t.oracle : INFINITY;
    if (r >= worst) {
      worst = r;
      where = t.run;
    }
  }
  verdict(7, !timings.empty() && worst < kAc7RatioMax,
          "worst deletion/oracle time " + fmt("%.2e", worst) + " (" + where + ") over " +
              std::to_string(timings.size()) + " runs");
}

void ac10() {
  const LabeledDataset ds = three_blobs(100, 10);
  double worst_drop = 0;
  for (std::uint64_t s = 0; s < kAc10Inits; ++s) {
    const GaussianMixture gm = gmm_fit(ds.x, 4, 50, s);
    for (std::size_t i = 1; i < gm.log_likelihood.size(); ++i)
      worst_drop = std::max(worst_drop, gm.log_likelihood[i - 1] - gm.log_likelihood[i]);
  }
  verdict(10, worst_drop <= kAc10Tol,
          "largest log-likelihood drop " + fmt("%.3g", worst_drop) + " over " + std::to_string(kAc10Inits) +
              " initializations");
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  try {
    ac1();
    ac2();
    ac4();
    ac5();
    ac6();
    ac8();
    ac9();
    ac3();
    ac7();
    ac10();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d failed, %.1f s\n", failures, since(t0));
  return failures == 0 ? 0 : 1;
}
