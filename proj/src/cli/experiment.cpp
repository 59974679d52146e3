#include "spmu/cli/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "spmu/data/csv.hpp"
#include "spmu/data/forget.hpp"
#include "spmu/gen/gmm.hpp"
#include "spmu/io/checkpoint.hpp"
#include "spmu/metrics/metrics.hpp"
#include "spmu/metrics/report.hpp"
#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/rng.hpp"
#include "spmu/unlearn/deletion.hpp"
#include "spmu/unlearn/knn.hpp"

namespace spmu {

using nlohmann::json;

namespace {

// ---- config parsing --------------------------------------------------------

const json& object_at(const json& j, const char* key, const std::string& field) {
  if (!j.contains(key)) throw ValidationError(field, "missing field");
  const json& v = j.at(key);
  if (!v.is_object()) throw ValidationError(field, "expected an object");
  return v;
}

template <class T>
void get_to(const json& j, const char* key, const std::string& field, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(field, "wrong type");
  }
}

void check_keys(const json& j, const std::string& prefix, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError(prefix + key, "unknown field");
    }
  }
}

DatasetSpec parse_dataset(const json& j) {
  check_keys(j, "dataset.",
             {"kind", "per_class", "noise", "num_classes", "centers", "sigma", "outliers", "csv", "test_fraction"});
  DatasetSpec d;
  get_to(j, "kind", "dataset.kind", d.kind);
  if (d.kind != "moons" && d.kind != "blobs" && d.kind != "csv") {
    throw ValidationError("dataset.kind", "unknown dataset kind '" + d.kind + "'");
  }
  get_to(j, "per_class", "dataset.per_class", d.per_class);
  get_to(j, "noise", "dataset.noise", d.noise);
  get_to(j, "num_classes", "dataset.num_classes", d.num_classes);
  get_to(j, "centers", "dataset.centers", d.centers);
  get_to(j, "sigma", "dataset.sigma", d.sigma);
  get_to(j, "csv", "dataset.csv", d.csv_path);
  get_to(j, "test_fraction", "dataset.test_fraction", d.test_fraction);
  if (d.kind != "csv" && d.per_class < 2) throw ValidationError("dataset.per_class", "need at least 2 per class");
  if (!(d.noise >= 0.0)) throw ValidationError("dataset.noise", "must be non-negative");
  if (!(d.sigma >= 0.0)) throw ValidationError("dataset.sigma", "must be non-negative");
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) {
    throw ValidationError("dataset.test_fraction", "must lie in (0, 1)");
  }
  if (d.kind == "blobs") {
    if (d.num_classes < 2) throw ValidationError("dataset.num_classes", "need at least two classes");
    if (!d.centers.empty()) {
      if (d.centers.size() != d.num_classes) throw ValidationError("dataset.centers", "one center per class");
      for (const auto& c : d.centers)
        if (c.size() != d.centers.front().size() || c.empty()) {
          throw ValidationError("dataset.centers", "centers must share a positive width");
        }
    }
  }
  if (d.kind == "csv" && d.csv_path.empty()) throw ValidationError("dataset.csv", "path required for csv data");
  if (j.contains("outliers")) {
    const json& o = object_at(j, "outliers", "dataset.outliers");
    check_keys(o, "dataset.outliers.", {"center", "sigma", "count", "label"});
    OutlierSpec s;
    get_to(o, "center", "dataset.outliers.center", s.center);
    get_to(o, "sigma", "dataset.outliers.sigma", s.sigma);
    get_to(o, "count", "dataset.outliers.count", s.count);
    get_to(o, "label", "dataset.outliers.label", s.label);
    if (s.center.empty()) throw ValidationError("dataset.outliers.center", "missing center");
    if (s.count == 0) throw ValidationError("dataset.outliers.count", "must be positive");
    d.outliers = s;
  }
  return d;
}

ModelSpec parse_model(const json& j) {
  ModelSpec m;
  get_to(j, "kind", "model.kind", m.kind);
  static const std::set<std::string> kinds{"spm", "knn", "parametric", "spm_gen", "gmm"};
  if (!kinds.contains(m.kind)) throw ValidationError("model.kind", "unknown model kind '" + m.kind + "'");
  json rest = j;
  rest.erase("kind");
  if (m.kind == "spm") {
    std::string reduction = "full";
    get_to(j, "reduction", "model.reduction", reduction);
    get_to(j, "k", "model.k", m.retrieval_k);
    try {
      m.reduction = reduction_from_name(reduction);
    } catch (const ValidationError& e) {
      throw ValidationError("model.reduction", e.what());
    }
    if (m.reduction == Reduction::retrieval && m.retrieval_k == 0) {
      throw ValidationError("model.k", "retrieval k must be positive");
    }
    rest.erase("reduction");
    rest.erase("k");
    check_keys(rest, "model.",
               {"input_dim", "num_classes", "hidden", "embed_dim", "attn_dim", "set_size", "batch_size", "epochs",
                "lr", "label_perm"});
    m.spm = spm_config_from_json(rest, "model.");
  } else if (m.kind == "knn") {
    check_keys(rest, "model.", {"k"});
    get_to(j, "k", "model.k", m.knn_k);
    if (m.knn_k == 0) throw ValidationError("model.k", "k must be positive");
  } else if (m.kind == "parametric") {
    check_keys(rest, "model.", {"input_dim", "num_classes", "hidden", "batch_size", "epochs", "lr"});
    m.parametric = parametric_config_from_json(rest, "model.");
  } else if (m.kind == "spm_gen") {
    check_keys(rest, "model.",
               {"input_dim", "num_classes", "down_hidden", "up_hidden", "width", "time_dim", "steps_t", "set_size",
                "batch_size", "train_steps", "lr", "label_perm"});
    m.gen = gen_config_from_json(rest, "model.");
  } else {
    check_keys(rest, "model.", {"components", "iters"});
    get_to(j, "components", "model.components", m.gmm_components);
    get_to(j, "iters", "model.iters", m.gmm_iters);
    if (m.gmm_components == 0) throw ValidationError("model.components", "must be positive");
  }
  return m;
}

ForgetConfig parse_forget(const json& j) {
  check_keys(j, "forget.", {"mode", "classes", "indices", "fraction", "replacement"});
  ForgetConfig f;
  get_to(j, "mode", "forget.mode", f.mode);
  get_to(j, "classes", "forget.classes", f.classes);
  get_to(j, "indices", "forget.indices", f.indices);
  get_to(j, "fraction", "forget.fraction", f.fraction);
  if (j.contains("replacement")) {
    std::size_t r = 0;
    get_to(j, "replacement", "forget.replacement", r);
    f.replacement = r;
  }
  if (f.mode == "classes") {
    if (f.classes.empty()) throw ValidationError("forget.classes", "no classes given");
  } else if (f.mode == "indices") {
    if (f.indices.empty()) throw ValidationError("forget.indices", "no indices given");
  } else if (f.mode == "random") {
    if (!(f.fraction > 0.0 && f.fraction < 1.0)) throw ValidationError("forget.fraction", "must lie in (0, 1)");
  } else if (f.mode != "outliers") {
    throw ValidationError("forget.mode", "unknown forget mode '" + f.mode + "'");
  }
  return f;
}

std::size_t model_classes(const ModelSpec& m, const DatasetSpec& d) {
  if (m.kind == "spm") return m.spm.num_classes;
  if (m.kind == "parametric") return m.parametric.num_classes;
  if (m.kind == "spm_gen") return m.gen.num_classes;
  if (d.kind == "moons") return 2;
  return d.num_classes;
}

std::size_t model_input_dim(const ModelSpec& m) {
  if (m.kind == "spm") return m.spm.input_dim;
  if (m.kind == "parametric") return m.parametric.input_dim;
  if (m.kind == "spm_gen") return m.gen.input_dim;
  return 0;
}

// ---- run helpers -----------------------------------------------------------

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t stream(std::uint64_t seed, std::uint64_t k) { return mix_seed(seed * 16 + k); }

std::vector<std::size_t> forget_rows(const ForgetConfig& f, const Split& s, std::size_t base_rows,
                                     std::uint64_t seed) {
  ForgetSpec spec;
  if (f.mode == "classes") {
    spec = ForgetSpec::by_classes(f.classes);
  } else if (f.mode == "indices") {
    spec = ForgetSpec::by_indices(f.indices);
  } else if (f.mode == "random") {
    spec = ForgetSpec::random(f.fraction, stream(seed, 4));
  } else {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < s.train_index.size(); ++i)
      if (s.train_index[i] >= base_rows) rows.push_back(i);
    if (rows.empty()) throw ValidationError("forget.mode", "no outlier rows landed in the training split");
    spec = ForgetSpec::by_indices(rows);
  }
  try {
    return resolve_forget(s.train, spec);
  } catch (const DomainError& e) {
    throw ValidationError("forget", e.what());
  }
}

std::array<double, 4> auto_extent(const LabeledDataset& ds, double margin) {
  std::array<double, 4> e{ds.x(0, 0), ds.x(0, 0), ds.x(0, 1), ds.x(0, 1)};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    e[0] = std::min(e[0], ds.x(i, 0));
    e[1] = std::max(e[1], ds.x(i, 0));
    e[2] = std::min(e[2], ds.x(i, 1));
    e[3] = std::max(e[3], ds.x(i, 1));
  }
  e[0] -= margin;
  e[1] += margin;
  e[2] -= margin;
  e[3] += margin;
  return e;
}

struct NamedPredictor {
  std::string name;
  double seconds = 0.0;
  ProbaFn predict;
  json checkpoint;
};

struct ClassifierOutcome {
  double train_seconds = 0.0;
  NamedPredictor base;
  std::vector<NamedPredictor> methods;
  NamedPredictor oracle;
};

Mat member_rows(const LabeledDataset& train, const std::vector<std::size_t>& ids) {
  return train.x.gather_rows(ids);
}

ClassifierOutcome run_spm(const ExperimentConfig& cfg, const LabeledDataset& train,
                          const std::vector<std::size_t>& forget, std::uint64_t seed) {
  const ModelSpec& m = cfg.model;
  ClassifierOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const SpmClassifier model = fit(m.spm, train, seed);
  out.train_seconds = seconds_since(t0);
  const std::size_t k = m.reduction == Reduction::retrieval ? std::min(m.retrieval_k, train.size()) : 0;
  SpmPredictor base(model, encode_set(model, train), m.reduction, k);
  out.base = {"base", 0.0, [base](const Mat& x) { return base.predict_proba(x); },
              checkpoint_spm(base, member_rows(train, base.members().source_ids))};
  for (const std::string& method : cfg.methods) {
    auto r = test_time_delete(base, forget);
    const SpmPredictor p = r.predictor;
    out.methods.push_back({method, r.seconds, [p](const Mat& x) { return p.predict_proba(x); },
                           checkpoint_spm(p, member_rows(train, p.members().source_ids))});
  }
  auto o = retrain_oracle(m.spm, train, forget, seed, m.reduction, k);
  const SpmPredictor op = o.predictor;
  out.oracle = {"oracle", o.seconds, [op](const Mat& x) { return op.predict_proba(x); },
                checkpoint_spm(op, member_rows(train, op.members().source_ids))};
  return out;
}

ClassifierOutcome run_knn(const ExperimentConfig& cfg, const LabeledDataset& train,
                          const std::vector<std::size_t>& forget) {
  const std::size_t k = cfg.model.knn_k;
  if (k > train.size() - forget.size()) throw ValidationError("model.k", "k exceeds the retained set size");
  ClassifierOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const KnnIndex base = build_knn(train);
  out.train_seconds = seconds_since(t0);
  out.base = {"base", 0.0, [base, k](const Mat& x) { return knn_predict_proba(base, x, k); }, checkpoint_knn(base, k)};
  for (const std::string& method : cfg.methods) {
    const auto t1 = std::chrono::steady_clock::now();
    const KnnIndex del = knn_delete(base, forget);
    const double s = seconds_since(t1);
    out.methods.push_back({method, s, [del, k](const Mat& x) { return knn_predict_proba(del, x, k); },
                           checkpoint_knn(del, k)});
  }
  const auto t2 = std::chrono::steady_clock::now();
  const auto keep = complement(train.size(), forget);
  const KnnIndex orc = build_knn(train, keep);
  out.oracle = {"oracle", seconds_since(t2), [orc, k](const Mat& x) { return knn_predict_proba(orc, x, k); },
                checkpoint_knn(orc, k)};
  return out;
}

ClassifierOutcome run_parametric(const ExperimentConfig& cfg, const LabeledDataset& train,
                                 const std::vector<std::size_t>& forget, std::uint64_t seed) {
  const ParametricConfig& pc = cfg.model.parametric;
  ClassifierOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const ParametricClassifier base = fit_parametric(pc, train, seed);
  out.train_seconds = seconds_since(t0);
  out.base = {"base", 0.0, [base](const Mat& x) { return base.predict_proba(x); }, checkpoint_parametric(base)};
  const LabeledDataset forget_ds = subset(train, forget);
  const LabeledDataset retain = retain_set(train, forget);
  for (const std::string& method : cfg.methods) {
    const BaselineOutcome r = method == "ga"
                                  ? unlearn_ga(base, forget_ds, cfg.baselines.ga_steps, cfg.baselines.ga_lr)
                                  : unlearn_ft(base, retain, cfg.baselines.ft_steps, cfg.baselines.ft_lr,
                                               stream(seed, 5));
    const ParametricClassifier um = r.model;
    out.methods.push_back({method, r.seconds, [um](const Mat& x) { return um.predict_proba(x); },
                           checkpoint_parametric(um)});
  }
  const auto t1 = std::chrono::steady_clock::now();
  const ParametricClassifier orc = fit_parametric(pc, retain, seed);
  out.oracle = {"oracle", seconds_since(t1), [orc](const Mat& x) { return orc.predict_proba(x); },
                checkpoint_parametric(orc)};
  return out;
}

MethodReport evaluate(const NamedPredictor& p, const ClassifierOutcome& o, const LabeledDataset& train,
                      const std::vector<std::size_t>& forget, const LabeledDataset& test, bool pg_on_retain) {
  MethodReport r;
  r.method = p.name;
  r.seconds = p.seconds;
  r.gaps = delta_ua_ra_ta(p.predict, o.oracle.predict, train, forget, test);
  r.test = claim1_check(p.predict(test.x), o.oracle.predict(test.x), test.y);
  if (pg_on_retain) {
    const LabeledDataset retain = retain_set(train, forget);
    r.retain = claim1_check(p.predict(retain.x), o.oracle.predict(retain.x), retain.y);
  }
  return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_samples_csv(const std::filesystem::path& path, const Mat& x, std::size_t c, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  for (std::size_t a = 0; a < x.cols(); ++a) out << 'x' << a << ',';
  out << "class,seed\n";
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t a = 0; a < x.cols(); ++a) out << x(i, a) << ',';
    out << c << ',' << seed << '\n';
  }
}

Mat class_rows(const LabeledDataset& ds, std::size_t c) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.y[i] == c) rows.push_back(i);
  return ds.x.gather_rows(rows);
}

json run_gen(const ExperimentConfig& cfg, const LabeledDataset& train, std::uint64_t seed,
             const std::filesystem::path& out_dir, bool first) {
  const GenConfig& gc = cfg.model.gen;
  if (cfg.forget.mode != "classes" || cfg.forget.classes.size() != 1) {
    throw ValidationError("forget.classes", "generative unlearning deletes exactly one class");
  }
  const std::size_t c = cfg.forget.classes.front();
  if (c >= gc.num_classes) throw ValidationError("forget.classes", "class out of range");
  std::size_t r = cfg.forget.replacement.value_or(c == 0 ? 1 : 0);
  if (r >= gc.num_classes || r == c) throw ValidationError("forget.replacement", "invalid replacement class");

  json run;
  const auto t0 = std::chrono::steady_clock::now();
  const SpmDenoiser base = fit_gen(gc, train, seed);
  run["train_seconds"] = seconds_since(t0);
  const PatchSet set_base = encode_patches(base, train);

  const auto t1 = std::chrono::steady_clock::now();
  const PatchSet set_del = unlearn_substitute(set_base, c, r);
  const double del_seconds = seconds_since(t1);

  std::vector<std::size_t> forget;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train.y[i] == c) forget.push_back(i);
  const auto t2 = std::chrono::steady_clock::now();
  const LabeledDataset retain = retain_set(train, forget);
  const SpmDenoiser oracle = fit_gen(gc, retain, seed);
  const PatchSet set_orc = redirect_class(encode_patches(oracle, retain), c, r);
  const double orc_seconds = seconds_since(t2);

  ParametricConfig judge_cfg;
  judge_cfg.input_dim = gc.input_dim;
  judge_cfg.num_classes = gc.num_classes;
  const ParametricClassifier judge = fit_parametric(judge_cfg, train, stream(seed, 7));

  const std::size_t n = cfg.gen_samples;
  const std::uint64_t ss = stream(seed, 6);
  const Mat xb = sample(base, c, set_base, n, ss);
  const Mat xd = sample(base, c, set_del, n, ss);
  const Mat xo = sample(oracle, c, set_orc, n, ss);

  GenReport g;
  g.deleted = c;
  g.replacement = r;
  g.ua_base = gen_ua(judge.predict_proba(xb), c);
  g.ua_deletion = gen_ua(judge.predict_proba(xd), c);
  g.ua_oracle = gen_ua(judge.predict_proba(xo), c);
  g.mmd_base_oracle = mmd_rbf(xb, xo);
  g.mmd_deletion_oracle = mmd_rbf(xd, xo);
  g.mmd_deletion_deleted_data = mmd_rbf(xd, class_rows(train, c));
  g.mmd_deletion_replacement_data = mmd_rbf(xd, class_rows(train, r));
  run["gen"] = to_json(g);
  run["methods"] = json::array({json{{"method", "deletion"},
                                     {"seconds", del_seconds},
                                     {"delta", {{"ua", std::abs(g.ua_deletion - g.ua_oracle)}}}}});
  run["oracle_seconds"] = orc_seconds;

  if (first) {
    for (std::size_t k = 0; k < gc.num_classes; ++k) {
      write_samples_csv(out_dir / ("samples_" + std::to_string(k) + ".csv"), sample(base, k, set_base, n, ss), k,
                        seed);
    }
    write_samples_csv(out_dir / ("samples_" + std::to_string(c) + "_deletion.csv"), xd, c, seed);
    write_samples_csv(out_dir / ("samples_" + std::to_string(c) + "_oracle.csv"), xo, c, seed);
    write_json_file(checkpoint_gen(base), out_dir / "ckpt_base.json");
    write_json_file(checkpoint_gen(oracle), out_dir / "ckpt_oracle.json");
  }
  return run;
}

json run_gmm(const ExperimentConfig& cfg, const LabeledDataset& train, std::uint64_t seed) {
  json run;
  const auto t0 = std::chrono::steady_clock::now();
  const GmmModel model = gmm_fit_classes(train, cfg.model.gmm_components, cfg.model.gmm_iters, seed);
  run["train_seconds"] = seconds_since(t0);
  run["methods"] = json::array();
  json classes = json::array();
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const GaussianMixture& gm = model.classes[c];
    if (gm.components() == 0) continue;
    const auto& ll = gm.log_likelihood;
    bool monotone = true;
    for (std::size_t i = 1; i < ll.size(); ++i) monotone = monotone && ll[i] >= ll[i - 1] - 1e-9;
    const Mat xs = gmm_sample(model, c, cfg.gen_samples, stream(seed, 6 + c));
    classes.push_back(json{{"class", c},
                           {"final_log_likelihood", ll.back()},
                           {"em_monotone", monotone},
                           {"mmd_vs_data", mmd_rbf(xs, class_rows(train, c))}});
  }
  run["gmm"] = classes;
  return run;
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  if (!j.is_object()) throw ValidationError("config", "expected a JSON object");
  check_keys(j, "",
             {"version", "dataset", "model", "forget", "unlearn", "metrics", "seeds", "output_dir"});
  ExperimentConfig c;
  c.raw = j;
  if (!j.contains("version")) throw ValidationError("version", "missing field");
  get_to(j, "version", "version", c.version);
  if (c.version != kConfigVersion) throw ValidationError("version", "unsupported config version");
  c.dataset = parse_dataset(object_at(j, "dataset", "dataset"));
  c.model = parse_model(object_at(j, "model", "model"));
  if (j.contains("forget")) c.forget = parse_forget(object_at(j, "forget", "forget"));
  else throw ValidationError("forget", "missing field");
  get_to(j, "unlearn", "unlearn", c.methods);
  get_to(j, "output_dir", "output_dir", c.output_dir);
  if (c.output_dir.empty() || std::filesystem::path(c.output_dir).is_absolute()) {
    throw ValidationError("output_dir", "must be a non-empty relative path");
  }
  if (!j.contains("seeds")) throw ValidationError("seeds", "missing field");
  get_to(j, "seeds", "seeds", c.seeds);
  if (c.seeds.empty()) throw ValidationError("seeds", "at least one seed required");

  if (j.contains("metrics")) {
    const json& m = object_at(j, "metrics", "metrics");
    check_keys(m, "metrics.", {"pg_on_retain", "grid", "gen_samples", "baselines"});
    get_to(m, "pg_on_retain", "metrics.pg_on_retain", c.pg_on_retain);
    get_to(m, "gen_samples", "metrics.gen_samples", c.gen_samples);
    if (c.gen_samples < 2) throw ValidationError("metrics.gen_samples", "need at least two samples");
    if (m.contains("grid")) {
      const json& g = object_at(m, "grid", "metrics.grid");
      check_keys(g, "metrics.grid.", {"extent", "margin", "resolution"});
      GridSpec gs;
      if (g.contains("extent")) {
        std::array<double, 4> e{};
        get_to(g, "extent", "metrics.grid.extent", e);
        if (!(e[0] < e[1] && e[2] < e[3])) throw ValidationError("metrics.grid.extent", "empty extent");
        gs.extent = e;
      }
      get_to(g, "margin", "metrics.grid.margin", gs.margin);
      get_to(g, "resolution", "metrics.grid.resolution", gs.resolution);
      if (gs.resolution < 2) throw ValidationError("metrics.grid.resolution", "must be at least 2");
      c.grid = gs;
    }
    if (m.contains("baselines")) {
      const json& b = object_at(m, "baselines", "metrics.baselines");
      check_keys(b, "metrics.baselines.", {"ga_steps", "ga_lr", "ft_steps", "ft_lr"});
      get_to(b, "ga_steps", "metrics.baselines.ga_steps", c.baselines.ga_steps);
      get_to(b, "ga_lr", "metrics.baselines.ga_lr", c.baselines.ga_lr);
      get_to(b, "ft_steps", "metrics.baselines.ft_steps", c.baselines.ft_steps);
      get_to(b, "ft_lr", "metrics.baselines.ft_lr", c.baselines.ft_lr);
    }
  }

  static const std::map<std::string, std::set<std::string>> allowed{
      {"spm", {"deletion"}}, {"knn", {"deletion"}}, {"parametric", {"ga", "ft"}}, {"spm_gen", {"deletion"}},
      {"gmm", {}}};
  std::set<std::string> seen;
  for (const std::string& method : c.methods) {
    if (!allowed.at(c.model.kind).contains(method)) {
      throw ValidationError("unlearn", "method '" + method + "' is not available for model '" + c.model.kind + "'");
    }
    if (!seen.insert(method).second) throw ValidationError("unlearn", "duplicate method '" + method + "'");
  }

  const std::size_t classes = model_classes(c.model, c.dataset);
  if (c.dataset.kind == "moons" && classes != 2) throw ValidationError("model.num_classes", "moons has two classes");
  if (c.dataset.kind == "blobs" && classes != c.dataset.num_classes) {
    throw ValidationError("model.num_classes", "differs from dataset.num_classes");
  }
  const std::size_t in_dim = model_input_dim(c.model);
  if (in_dim != 0 && c.dataset.kind == "moons" && in_dim != 2) {
    throw ValidationError("model.input_dim", "moons data is two-dimensional");
  }
  if (c.dataset.outliers) {
    if (c.dataset.outliers->label >= classes) throw ValidationError("dataset.outliers.label", "class out of range");
    if (c.dataset.kind == "moons" && c.dataset.outliers->center.size() != 2) {
      throw ValidationError("dataset.outliers.center", "moons data is two-dimensional");
    }
  } else if (c.forget.mode == "outliers") {
    throw ValidationError("forget.mode", "outlier deletion needs dataset.outliers");
  }
  for (std::size_t cls : c.forget.classes)
    if (cls >= classes) throw ValidationError("forget.classes", "class out of range");
  if (c.grid && c.model.kind != "spm" && c.model.kind != "knn" && c.model.kind != "parametric") {
    throw ValidationError("metrics.grid", "boundary grids need a classifier");
  }
  return c;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  const char* root = std::getenv(kOutputRootEnv);
  const std::filesystem::path base = (root && *root) ? std::filesystem::path(root) : std::filesystem::current_path();
  return base / config.output_dir;
}

BuiltData build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  BuiltData out;
  if (spec.kind == "moons") {
    out.data = gen_moons(spec.per_class, spec.noise, stream(seed, 1));
  } else if (spec.kind == "blobs") {
    Mat centers;
    if (spec.centers.empty()) {
      centers = Mat(spec.num_classes, 2);
      for (std::size_t c = 0; c < spec.num_classes; ++c) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(spec.num_classes);
        centers(c, 0) = 2.0 * std::cos(a);
        centers(c, 1) = 2.0 * std::sin(a);
      }
    } else {
      centers = Mat(spec.centers.size(), spec.centers.front().size());
      for (std::size_t c = 0; c < spec.centers.size(); ++c)
        std::copy(spec.centers[c].begin(), spec.centers[c].end(), centers.row(c).begin());
    }
    out.data = gen_blobs(spec.num_classes, spec.per_class, centers, spec.sigma, stream(seed, 1));
  } else {
    try {
      out.data = read_dataset_csv(std::filesystem::path(spec.csv_path), spec.num_classes);
    } catch (const Error& e) {
      throw ValidationError("dataset.csv", e.what());
    }
  }
  out.base_rows = out.data.size();
  if (spec.outliers) {
    if (spec.outliers->center.size() != out.data.dim()) {
      throw ValidationError("dataset.outliers.center", "width differs from the data");
    }
    out.data = append_cluster(out.data, spec.outliers->center, spec.outliers->sigma, spec.outliers->count,
                              spec.outliers->label, stream(seed, 2));
  }
  return out;
}

Mat make_grid(const std::array<double, 4>& e, std::size_t r) {
  if (r < 2) throw DomainError("make_grid: resolution must be at least 2");
  Mat g(r * r, 2);
  const double denom = static_cast<double>(r - 1);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      g(i * r + j, 0) = e[0] + (e[1] - e[0]) * static_cast<double>(i) / denom;
      g(i * r + j, 1) = e[2] + (e[3] - e[2]) * static_cast<double>(j) / denom;
    }
  }
  return g;
}

void write_grid_csv(const std::filesystem::path& path, const Mat& points, const Mat& probs) {
  if (points.rows() != probs.rows() || points.cols() != 2) throw ShapeError("write_grid_csv: shape mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "x0,x1,pred";
  for (std::size_t c = 0; c < probs.cols(); ++c) out << ",prob_" << c;
  out << '\n';
  for (std::size_t i = 0; i < points.rows(); ++i) {
    out << points(i, 0) << ',' << points(i, 1) << ',' << argmax(probs.row(i));
    for (double p : probs.row(i)) out << ',' << p;
    out << '\n';
  }
}

json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  json report;
  report["format_version"] = kConfigVersion;
  report["config"] = config.raw;
  report["model"] = config.model.kind;
  report["runs"] = json::array();
  std::string results;
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) results += (i ? "," : "") + kTableColumns[i];
  results += "\n";

  for (std::size_t si = 0; si < config.seeds.size(); ++si) {
    const std::uint64_t seed = config.seeds[si];
    const bool first = si == 0;
    const BuiltData built = build_dataset(config.dataset, seed);
    const std::size_t classes = model_classes(config.model, config.dataset);
    if (built.data.num_classes > classes) throw ValidationError("model.num_classes", "data has more classes");
    LabeledDataset data = built.data;
    data.num_classes = classes;
    const std::size_t in_dim = model_input_dim(config.model);
    if (in_dim != 0 && data.dim() != in_dim) throw ValidationError("model.input_dim", "differs from the data width");
    Split split_data;
    try {
      split_data = split(data, config.dataset.test_fraction, stream(seed, 3));
    } catch (const DomainError& e) {
      throw ValidationError("dataset", e.what());
    }
    const LabeledDataset& train = split_data.train;
    const LabeledDataset& test = split_data.test;

    json run;
    run["seed"] = seed;
    run["n_train"] = train.size();
    run["n_test"] = test.size();

    if (config.model.kind == "spm_gen") {
      json g = run_gen(config, train, seed, out_dir, first);
      run.update(g);
    } else if (config.model.kind == "gmm") {
      run.update(run_gmm(config, train, seed));
    } else {
      const auto forget = forget_rows(config.forget, split_data, built.base_rows, seed);
      run["n_forget"] = forget.size();
      ClassifierOutcome o;
      if (config.model.kind == "spm") o = run_spm(config, train, forget, seed);
      else if (config.model.kind == "knn") o = run_knn(config, train, forget);
      else o = run_parametric(config, train, forget, seed);
      run["train_seconds"] = o.train_seconds;
      run["oracle_seconds"] = o.oracle.seconds;

      std::vector<MethodReport> reports;
      reports.push_back(evaluate(o.base, o, train, forget, test, config.pg_on_retain));
      for (const auto& m : o.methods) reports.push_back(evaluate(m, o, train, forget, test, config.pg_on_retain));

      if (config.grid && data.dim() == 2) {
        const auto extent = config.grid->extent.value_or(auto_extent(data, config.grid->margin));
        const Mat pts = make_grid(extent, config.grid->resolution);
        const Mat po = o.oracle.predict(pts);
        std::vector<const NamedPredictor*> all{&o.base};
        for (const auto& m : o.methods) all.push_back(&m);
        for (std::size_t i = 0; i < all.size(); ++i) {
          const Mat p = all[i]->predict(pts);
          reports[i].grid_pg_h = pg_hard(p, po);
          if (first) write_grid_csv(out_dir / ("grid_" + all[i]->name + ".csv"), pts, p);
        }
        if (first) write_grid_csv(out_dir / "grid_oracle.csv", pts, po);
        run["grid_extent"] = extent;
      }
      if (first) {
        write_json_file(o.base.checkpoint, out_dir / "ckpt_base.json");
        for (const auto& m : o.methods) write_json_file(m.checkpoint, out_dir / ("ckpt_" + m.name + ".json"));
        write_json_file(o.oracle.checkpoint, out_dir / "ckpt_oracle.json");
      }
      run["methods"] = json::array();
      for (const auto& r : reports) run["methods"].push_back(to_json(r));
    }
    report["runs"].push_back(run);
  }

  for (const TableRow& row : table_rows(report)) results += csv_line(row) + "\n";
  write_text(out_dir / "results.csv", results);
  write_json_file(report, out_dir / "report.json");
  return report;
}

}  // namespace spmu
