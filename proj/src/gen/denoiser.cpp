#include "spmu/gen/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spmu/data/label_perm.hpp"
#include "spmu/data/sampling.hpp"
#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/optim.hpp"
#include "spmu/numeric/tape.hpp"

namespace spmu {

void GenConfig::validate() const {
  if (input_dim == 0 || width == 0) throw DomainError("gen config: zero width");
  if (num_classes < 2) throw DomainError("gen config: need at least two classes");
  if (time_dim == 0 || time_dim % 2 != 0) throw DomainError("gen config: time_dim must be even");
  if (steps_t < 2) throw DomainError("gen config: need at least two diffusion steps");
  if (set_size < 2) throw DomainError("gen config: set_size must be at least 2");
  if (batch_size == 0) throw DomainError("gen config: batch_size must be positive");
  if (!(lr > 0.0)) throw DomainError("gen config: lr must be positive");
  for (std::size_t h : down_hidden)
    if (h == 0) throw DomainError("gen config: zero hidden width");
  for (std::size_t h : up_hidden)
    if (h == 0) throw DomainError("gen config: zero hidden width");
}

std::vector<std::size_t> PatchSet::rows_for(std::size_t c, std::optional<std::size_t> exclude) const {
  if (c >= serve.size()) throw DomainError("patch set: class out of range");
  const std::size_t target = serve[c];
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] != target) continue;
    if (exclude && source_ids[j] == *exclude) continue;
    out.push_back(j);
  }
  return out;
}

void PatchSet::validate() const {
  if (embeddings.rows() != labels.size() || source_ids.size() != labels.size()) {
    throw ShapeError("patch set: row counts disagree");
  }
  for (std::size_t y : labels)
    if (y >= serve.size()) throw DomainError("patch set: label out of range");
  for (std::size_t r : serve)
    if (r >= serve.size()) throw DomainError("patch set: served class out of range");
}

std::vector<Mat*> SpmDenoiser::parameters() {
  std::vector<Mat*> out;
  append_parameters(down, out);
  append_parameters(up, out);
  for (Mat* m : {&time_proj, &class_embed, &w_query, &w_key, &attn_bias, &attn_w}) out.push_back(m);
  return out;
}

std::vector<const Mat*> SpmDenoiser::parameters() const {
  std::vector<const Mat*> out;
  append_parameters(down, out);
  append_parameters(up, out);
  for (const Mat* m : {&time_proj, &class_embed, &w_query, &w_key, &attn_bias, &attn_w}) out.push_back(m);
  return out;
}

namespace {

Mat uniform_mat(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Mat m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

void add_row(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Shared time and class terms of the pre-fusion latent.
Mat conditioning_rows(const SpmDenoiser& model, std::span<const std::size_t> t, std::span<const std::size_t> c) {
  Mat feats(t.size(), model.config.time_dim);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 1 || t[i] > model.config.steps_t) throw DomainError("denoise: step out of range");
    if (c[i] >= model.config.num_classes) throw DomainError("denoise: class out of range");
    const auto row = model.time_table.row(t[i] - 1);
    std::copy(row.begin(), row.end(), feats.row(i).begin());
  }
  Mat out = matmul(feats, model.time_proj);
  for (std::size_t i = 0; i < t.size(); ++i) add_row(out.row(i), model.class_embed.row(c[i]));
  return out;
}

}  // namespace

SpmDenoiser init_denoiser(const GenConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  SpmDenoiser model;
  model.config = config;
  model.schedule = linear_schedule(config.steps_t);

  std::vector<std::size_t> down_widths{config.input_dim};
  down_widths.insert(down_widths.end(), config.down_hidden.begin(), config.down_hidden.end());
  down_widths.push_back(config.width);
  std::vector<std::size_t> up_widths{config.width};
  up_widths.insert(up_widths.end(), config.up_hidden.begin(), config.up_hidden.end());
  up_widths.push_back(config.input_dim);
  model.down = init_mlp(down_widths, false, rng);
  model.up = init_mlp(up_widths, false, rng);

  model.time_table = Mat(config.steps_t, config.time_dim);
  for (std::size_t t = 1; t <= config.steps_t; ++t) {
    const auto e = sinusoidal_embedding(t, config.time_dim);
    std::copy(e.begin(), e.end(), model.time_table.row(t - 1).begin());
  }
  const double bw = 1.0 / std::sqrt(static_cast<double>(config.width));
  model.time_proj = uniform_mat(config.time_dim, config.width, 1.0 / std::sqrt(double(config.time_dim)), rng);
  model.class_embed = uniform_mat(config.num_classes, config.width, 1.0, rng);
  model.w_query = uniform_mat(config.width, config.width, bw, rng);
  model.w_key = uniform_mat(config.width, config.width, bw, rng);
  model.attn_bias = uniform_mat(1, config.width, bw, rng);
  model.attn_w = uniform_mat(config.width, 1, bw, rng);
  return model;
}

PatchSet encode_patches(const SpmDenoiser& model, const Mat& x, std::vector<std::size_t> labels,
                        std::vector<std::size_t> source_ids) {
  if (x.cols() != model.config.input_dim) throw ShapeError("encode_patches: input width mismatch");
  if (labels.size() != x.rows() || source_ids.size() != x.rows()) {
    throw ShapeError("encode_patches: label or id count mismatch");
  }
  PatchSet set;
  set.embeddings = forward(model.down, x);
  set.labels = std::move(labels);
  set.source_ids = std::move(source_ids);
  set.serve.resize(model.config.num_classes);
  std::iota(set.serve.begin(), set.serve.end(), std::size_t{0});
  set.validate();
  return set;
}

PatchSet encode_patches(const SpmDenoiser& model, const LabeledDataset& ds) {
  std::vector<std::size_t> ids(ds.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return encode_patches(model, ds.x, ds.y, std::move(ids));
}

std::vector<double> fusion_weights(const SpmDenoiser& model, std::span<const double> z, const Mat& q_embeddings) {
  const std::size_t d = model.config.width;
  if (z.size() != d || q_embeddings.cols() != d) throw ShapeError("fuse_patch: width mismatch");
  if (q_embeddings.rows() == 0) throw EmptySetError("fuse_patch: empty conditioning set");
  const Mat q = matmul(Mat::row_vector(z), model.w_query);
  const Mat k = matmul(q_embeddings, model.w_key);
  std::vector<double> scores(k.rows());
  for (std::size_t j = 0; j < k.rows(); ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double pre = q(0, c) + k(j, c) + model.attn_bias(0, c);
      if (pre > 0.0) acc += model.attn_w(c, 0) * pre;
    }
    scores[j] = acc;
  }
  return softmax(scores);
}

std::vector<double> fuse_patch(const SpmDenoiser& model, std::span<const double> z, const Mat& q_embeddings) {
  const auto alpha = fusion_weights(model, z, q_embeddings);
  const Mat k = matmul(q_embeddings, model.w_key);
  std::vector<double> out(model.config.width, 0.0);
  for (std::size_t j = 0; j < k.rows(); ++j)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += alpha[j] * k(j, c);
  return out;
}

std::vector<double> query_latent(const SpmDenoiser& model, std::span<const double> x_t, std::size_t t,
                                 std::size_t c) {
  if (x_t.size() != model.config.input_dim) throw ShapeError("denoise: input width mismatch");
  Mat z = forward(model.down, Mat::row_vector(x_t));
  const std::size_t ts[1] = {t};
  const std::size_t cs[1] = {c};
  z += conditioning_rows(model, ts, cs);
  return {z.values().begin(), z.values().end()};
}

std::vector<double> denoise(const SpmDenoiser& model, std::span<const double> x_t, std::size_t t, std::size_t c,
                            const PatchSet& set, std::optional<std::size_t> exclude) {
  auto z = query_latent(model, x_t, t, c);
  const auto rows = set.rows_for(c, exclude);
  if (rows.empty()) throw ConditioningError("denoise: no inputted-set element answers the class");
  const auto fused = fuse_patch(model, z, set.embeddings.gather_rows(rows));
  add_row(z, fused);
  const Mat eps = forward(model.up, Mat::row_vector(z));
  return {eps.values().begin(), eps.values().end()};
}

Mat denoise_batch(const SpmDenoiser& model, const Mat& x_t, std::size_t t, std::size_t c, const PatchSet& set) {
  if (x_t.cols() != model.config.input_dim) throw ShapeError("denoise: input width mismatch");
  const auto rows = set.rows_for(c);
  if (rows.empty()) throw ConditioningError("denoise: no inputted-set element answers the class");
  const std::size_t n = x_t.rows();
  Mat z = forward(model.down, x_t);
  const std::vector<std::size_t> ts(n, t), cs(n, c);
  if (n > 0) z += conditioning_rows(model, ts, cs);
  const Mat keys = matmul(set.embeddings.gather_rows(rows), model.w_key);
  const Mat q = matmul(z, model.w_query);
  const std::size_t d = model.config.width;
  std::vector<double> scores(keys.rows());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < keys.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double pre = q(b, k) + keys(j, k) + model.attn_bias(0, k);
        if (pre > 0.0) acc += model.attn_w(k, 0) * pre;
      }
      scores[j] = acc;
    }
    const auto alpha = softmax(scores);
    auto zb = z.row(b);
    for (std::size_t j = 0; j < keys.rows(); ++j)
      for (std::size_t k = 0; k < d; ++k) zb[k] += alpha[j] * keys(j, k);
  }
  return forward(model.up, z);
}

namespace {

void check_gen_batch(const SpmDenoiser& model, const GenBatch& batch, const GenSetBatch& set) {
  const std::size_t b = batch.x0.rows();
  if (b == 0) throw DomainError("gen_loss: empty batch");
  if (batch.x0.cols() != model.config.input_dim || !batch.x0.same_shape(batch.eps)) {
    throw ShapeError("gen_loss: batch shape mismatch");
  }
  if (batch.t.size() != b || batch.classes.size() != b || batch.source_ids.size() != b) {
    throw ShapeError("gen_loss: batch field lengths disagree");
  }
  if (set.x.rows() != set.labels.size() || set.source_ids.size() != set.labels.size() ||
      set.x.cols() != model.config.input_dim) {
    throw ShapeError("gen_loss: set field lengths disagree");
  }
}

// keep[b*m + j]: element j shares the query's class and is not the query itself.
std::vector<std::uint8_t> class_mask(const GenBatch& batch, const GenSetBatch& set, std::vector<double>& weight) {
  const std::size_t m = set.labels.size();
  std::vector<std::uint8_t> keep(batch.x0.rows() * m, 0);
  weight.assign(batch.x0.rows(), 0.0);
  for (std::size_t b = 0; b < batch.x0.rows(); ++b) {
    for (std::size_t j = 0; j < m; ++j) {
      if (set.labels[j] != batch.classes[b]) continue;
      if (batch.source_ids[b] && set.source_ids[j] == *batch.source_ids[b]) continue;
      keep[b * m + j] = 1;
      weight[b] = 1.0;
    }
  }
  return keep;
}

}  // namespace

GenLossGrad gen_loss_and_grad(const SpmDenoiser& model, const GenBatch& batch, const GenSetBatch& set) {
  check_gen_batch(model, batch, set);
  std::vector<double> weight;
  auto keep = class_mask(batch, set, weight);

  GradTape tape;
  const MlpVars down = bind(tape, model.down);
  const MlpVars up = bind(tape, model.up);
  const Var time_proj = tape.param(model.time_proj);
  const Var class_embed = tape.param(model.class_embed);
  const Var wq = tape.param(model.w_query);
  const Var wk = tape.param(model.w_key);
  const Var bias = tape.param(model.attn_bias);
  const Var w = tape.param(model.attn_w);

  Mat feats(batch.t.size(), model.config.time_dim);
  for (std::size_t i = 0; i < batch.t.size(); ++i) {
    if (batch.t[i] < 1 || batch.t[i] > model.config.steps_t) throw DomainError("gen_loss: step out of range");
    if (batch.classes[i] >= model.config.num_classes) throw DomainError("gen_loss: class out of range");
    const auto row = model.time_table.row(batch.t[i] - 1);
    std::copy(row.begin(), row.end(), feats.row(i).begin());
  }
  const Mat x_t = forward_diffuse(batch.x0, batch.t, batch.eps, model.schedule);

  Var z = forward(down, tape.constant(x_t));
  z = ad::add(z, ad::matmul(tape.constant(std::move(feats)), time_proj));
  z = ad::add(z, ad::gather_rows(class_embed, batch.classes));
  const Var keys = ad::matmul(forward(down, tape.constant(set.x)), wk);
  const Var scores = ad::additive_scores(ad::matmul(z, wq), keys, bias, w);
  const Var alpha = ad::masked_softmax_rows(scores, std::move(keep));
  const Var u = ad::add(z, ad::matmul(alpha, keys));
  const Var pred = forward(up, u);
  const Var total = ad::weighted_mse(pred, batch.eps, weight);
  tape.backward(total);

  GenLossGrad out;
  out.value = total.value()(0, 0);
  out.used_rows = static_cast<std::size_t>(std::count(weight.begin(), weight.end(), 1.0));
  append_gradients(down, out.grads);
  append_gradients(up, out.grads);
  for (Var v : {time_proj, class_embed, wq, wk, bias, w}) out.grads.push_back(grad_or_zero(v));
  return out;
}

double gen_loss(const SpmDenoiser& model, const GenBatch& batch, const GenSetBatch& set) {
  check_gen_batch(model, batch, set);
  const Mat x_t = forward_diffuse(batch.x0, batch.t, batch.eps, model.schedule);
  const Mat set_emb = forward(model.down, set.x);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t b = 0; b < batch.x0.rows(); ++b) {
    std::vector<std::size_t> rows;
    for (std::size_t j = 0; j < set.labels.size(); ++j) {
      if (set.labels[j] != batch.classes[b]) continue;
      if (batch.source_ids[b] && set.source_ids[j] == *batch.source_ids[b]) continue;
      rows.push_back(j);
    }
    if (rows.empty()) continue;
    auto z = query_latent(model, x_t.row(b), batch.t[b], batch.classes[b]);
    add_row(z, fuse_patch(model, z, set_emb.gather_rows(rows)));
    const Mat pred = forward(model.up, Mat::row_vector(z));
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double e = pred(0, c) - batch.eps(b, c);
      total += e * e / static_cast<double>(pred.cols());
    }
    ++used;
  }
  if (used == 0) throw EmptySetError("gen_loss: no row has a usable conditioning set");
  return total / static_cast<double>(used);
}

SpmDenoiser fit_gen(const GenConfig& config, const LabeledDataset& train, std::uint64_t seed) {
  config.validate();
  train.validate();
  if (train.dim() != config.input_dim) throw ShapeError("fit_gen: dataset width differs from config");
  if (train.num_classes != config.num_classes) throw ShapeError("fit_gen: class count differs from config");
  const auto counts = class_counts(train);
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t n) { return n > 0; }) < 2) {
    throw DomainError("fit_gen: need at least two populated classes");
  }

  SpmDenoiser model = init_denoiser(config, seed);
  Rng rng(mix_seed(seed));
  Adam adam(AdamHyper{config.lr});
  auto params = model.parameters();
  const std::size_t n = train.size();
  const std::size_t m = std::min(config.set_size, n);
  const std::size_t bsz = std::min(config.batch_size, n);

  for (std::size_t step = 0; step < config.train_steps; ++step) {
    const auto pi = config.label_perm ? LabelPermutation::random(config.num_classes, rng)
                                      : LabelPermutation::identity(config.num_classes);
    const auto rows = rng.sample_without_replacement(n, bsz);
    const auto set_idx = sample_inputted_set(n, m, std::nullopt, rng);

    GenBatch batch;
    batch.x0 = train.x.gather_rows(rows);
    batch.eps = Mat(bsz, config.input_dim);
    for (double& v : batch.eps.values()) v = rng.normal();
    for (std::size_t r : rows) {
      batch.t.push_back(1 + rng.below(config.steps_t));
      batch.classes.push_back(pi(train.y[r]));
      batch.source_ids.emplace_back(r);
    }
    GenSetBatch set;
    set.x = train.x.gather_rows(set_idx);
    for (std::size_t r : set_idx) set.labels.push_back(pi(train.y[r]));
    set.source_ids = set_idx;

    GenLossGrad lg;
    try {
      lg = gen_loss_and_grad(model, batch, set);
    } catch (const EmptySetError&) {
      continue;
    }
    if (!std::isfinite(lg.value)) throw DivergenceError("fit_gen: non-finite training loss");
    adam.step(params, lg.grads);
  }
  return model;
}

Mat sample(const SpmDenoiser& model, std::size_t c, const PatchSet& set, std::size_t n, std::uint64_t seed) {
  if (c >= model.config.num_classes) throw DomainError("sample: class out of range");
  const std::size_t d = model.config.input_dim;
  if (n == 0) return Mat(0, d);
  if (set.rows_for(c).empty()) throw ConditioningError("sample: no inputted-set element answers the class");
  const NoiseSchedule& s = model.schedule;
  Rng rng(seed);
  Mat x(n, d);
  for (double& v : x.values()) v = rng.normal();
  for (std::size_t t = s.steps(); t >= 1; --t) {
    const Mat eps = denoise_batch(model, x, t, c, set);
    const double coef = s.beta_at(t) / std::sqrt(1.0 - s.alpha_bar_at(t));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha_at(t));
    const double sigma = std::sqrt(s.posterior_variance(t));
    for (std::size_t i = 0; i < x.size(); ++i) {
      double v = inv_sqrt_alpha * (x.values()[i] - coef * eps.values()[i]);
      if (t > 1) v += sigma * rng.normal();
      x.values()[i] = v;
    }
  }
  return x;
}

PatchSet unlearn_substitute(const PatchSet& set, std::size_t deleted, std::size_t replacement) {
  set.validate();
  const std::size_t classes = set.serve.size();
  if (deleted >= classes || replacement >= classes) throw DomainError("unlearn_substitute: class out of range");
  if (deleted == replacement) throw DomainError("unlearn_substitute: replacement equals deleted class");
  const bool present = std::find(set.labels.begin(), set.labels.end(), deleted) != set.labels.end();
  if (!present) return set;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < set.size(); ++j)
    if (set.labels[j] != deleted) keep.push_back(j);
  if (keep.empty()) throw DomainError("unlearn_substitute: no remaining class");
  PatchSet out;
  out.embeddings = set.embeddings.gather_rows(keep);
  for (std::size_t j : keep) {
    out.labels.push_back(set.labels[j]);
    out.source_ids.push_back(set.source_ids[j]);
  }
  out.serve = set.serve;
  for (std::size_t& r : out.serve)
    if (r == deleted) r = replacement;
  if (out.rows_for(deleted).empty()) throw DomainError("unlearn_substitute: replacement class absent");
  return out;
}

PatchSet redirect_class(const PatchSet& set, std::size_t c, std::size_t r) {
  set.validate();
  if (c >= set.serve.size() || r >= set.serve.size()) throw DomainError("redirect_class: class out of range");
  PatchSet out = set;
  out.serve[c] = out.serve[r];
  if (out.rows_for(c).empty()) throw DomainError("redirect_class: replacement class absent");
  return out;
}

}  // namespace spmu
