#include "spmu/spm/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spmu/data/label_perm.hpp"
#include "spmu/data/sampling.hpp"
#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"
#include "spmu/numeric/optim.hpp"
#include "spmu/numeric/tape.hpp"

namespace spmu {

void SpmConfig::validate() const {
  if (input_dim == 0 || embed_dim == 0 || attn_dim == 0) throw DomainError("spm config: zero width");
  if (num_classes < 2) throw DomainError("spm config: need at least two classes");
  if (set_size < 2) throw DomainError("spm config: set_size must be at least 2");
  if (batch_size == 0) throw DomainError("spm config: batch_size must be positive");
  if (!(lr > 0.0)) throw DomainError("spm config: lr must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw DomainError("spm config: zero hidden width");
}

void InstanceSet::validate() const {
  if (source_ids.empty()) throw EmptySetError("instance set is empty");
  if (embeddings.rows() != source_ids.size() || labels.rows() != source_ids.size()) {
    throw ShapeError("instance set: row counts disagree");
  }
  std::vector<std::size_t> sorted = source_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DomainError("instance set: duplicate source id");
  }
}

std::vector<Mat*> SpmClassifier::parameters() {
  std::vector<Mat*> out;
  append_parameters(backbone, out);
  append_parameters(encoder, out);
  out.push_back(&w_query);
  out.push_back(&w_key);
  return out;
}

std::vector<const Mat*> SpmClassifier::parameters() const {
  std::vector<const Mat*> out;
  append_parameters(backbone, out);
  append_parameters(encoder, out);
  out.push_back(&w_query);
  out.push_back(&w_key);
  return out;
}

SpmClassifier init_classifier(const SpmConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<std::size_t> widths{config.input_dim};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.embed_dim);
  SpmClassifier model;
  model.config = config;
  model.backbone = init_mlp(widths, true, rng);
  model.encoder = init_mlp(widths, true, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
  model.w_query = Mat(config.embed_dim, config.attn_dim);
  model.w_key = Mat(config.embed_dim, config.attn_dim);
  for (double& v : model.w_query.values()) v = rng.uniform(-bound, bound);
  for (double& v : model.w_key.values()) v = rng.uniform(-bound, bound);
  return model;
}

Mat latent(const SpmClassifier& model, const Mat& x) { return forward(model.backbone, x); }

InstanceSet encode_set(const SpmClassifier& model, const Mat& x_set, const Mat& y_set,
                       std::vector<std::size_t> source_ids) {
  if (x_set.cols() != model.config.input_dim) throw ShapeError("encode_set: input width mismatch");
  if (y_set.cols() != model.config.num_classes || y_set.rows() != x_set.rows()) {
    throw ShapeError("encode_set: label shape mismatch");
  }
  if (source_ids.size() != x_set.rows()) throw ShapeError("encode_set: source id count mismatch");
  return InstanceSet{forward(model.encoder, x_set), y_set, std::move(source_ids)};
}

InstanceSet encode_set(const SpmClassifier& model, const LabeledDataset& ds) {
  std::vector<std::size_t> ids(ds.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return encode_set(model, ds.x, one_hot(ds.y, model.config.num_classes), std::move(ids));
}

std::vector<double> attention(const SpmClassifier& model, std::span<const double> z,
                              const InstanceSet& set, std::optional<std::size_t> exclude) {
  if (z.size() != model.config.embed_dim) throw ShapeError("attention: latent width mismatch");
  if (set.embeddings.cols() != model.config.embed_dim) throw ShapeError("attention: embedding width mismatch");
  const Mat q = matmul(Mat::row_vector(z), model.w_query);
  const std::size_t m = set.size();
  std::vector<double> logits;
  std::vector<std::size_t> live;
  logits.reserve(m);
  live.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (exclude && set.source_ids[i] == *exclude) continue;
    const Mat k = matmul(Mat::row_vector(set.embeddings.row(i)), model.w_key);
    double dot = 0.0;
    for (std::size_t a = 0; a < q.cols(); ++a) dot += q(0, a) * k(0, a);
    logits.push_back(dot);
    live.push_back(i);
  }
  if (live.empty()) throw EmptySetError("attention: inputted set is empty after exclusion");
  const auto alpha = softmax(logits);
  std::vector<double> out(m, 0.0);
  for (std::size_t j = 0; j < live.size(); ++j) out[live[j]] = alpha[j];
  return out;
}

std::vector<double> predict(const SpmClassifier& model, std::span<const double> x, const InstanceSet& set,
                            std::optional<std::size_t> exclude) {
  const Mat z = latent(model, Mat::row_vector(x));
  const auto alpha = attention(model, z.row(0), set, exclude);
  std::vector<double> out(set.labels.cols(), 0.0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (exclude && set.source_ids[i] == *exclude) continue;
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += alpha[i] * set.labels(i, c);
  }
  return out;
}

Mat predict_batch(const SpmClassifier& model, const Mat& x, const InstanceSet& set) {
  if (set.size() == 0) throw EmptySetError("predict_batch: inputted set is empty");
  const Mat q = matmul(latent(model, x), model.w_query);
  const Mat k = matmul(set.embeddings, model.w_key);
  const Mat logits = matmul_nt(q, k);
  Mat out(x.rows(), set.labels.cols());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const auto alpha = softmax(logits.row(b));
    auto o = out.row(b);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      const auto y = set.labels.row(i);
      for (std::size_t c = 0; c < o.size(); ++c) o[c] += alpha[i] * y[c];
    }
  }
  return out;
}

namespace {

std::vector<std::uint8_t> exclusion_mask(const QueryBatch& batch, const SetBatch& set) {
  const std::size_t m = set.source_ids.size();
  std::vector<std::uint8_t> keep(batch.x.rows() * m, 1);
  for (std::size_t b = 0; b < batch.x.rows(); ++b) {
    const auto& self = batch.source_ids[b];
    std::size_t kept = m;
    if (self) {
      for (std::size_t j = 0; j < m; ++j) {
        if (set.source_ids[j] == *self) {
          keep[b * m + j] = 0;
          --kept;
        }
      }
    }
    if (kept == 0) throw EmptySetError("loss: inputted set is empty after self-exclusion");
  }
  return keep;
}

void check_batch(const SpmClassifier& model, const QueryBatch& batch, const SetBatch& set) {
  if (batch.x.rows() == 0) throw DomainError("loss: empty batch");
  if (batch.targets.size() != batch.x.rows() || batch.source_ids.size() != batch.x.rows()) {
    throw ShapeError("loss: batch field lengths disagree");
  }
  if (set.x.rows() != set.source_ids.size() || set.labels.rows() != set.x.rows()) {
    throw ShapeError("loss: set field lengths disagree");
  }
  if (set.labels.cols() != model.config.num_classes) throw ShapeError("loss: set label width mismatch");
}

}  // namespace

LossGrad loss_and_grad(const SpmClassifier& model, const QueryBatch& batch, const SetBatch& set) {
  check_batch(model, batch, set);
  GradTape tape;
  const MlpVars backbone = bind(tape, model.backbone);
  const MlpVars encoder = bind(tape, model.encoder);
  const Var wq = tape.param(model.w_query);
  const Var wk = tape.param(model.w_key);

  const Var z = forward(backbone, tape.constant(batch.x));
  const Var s = forward(encoder, tape.constant(set.x));
  const Var logits = ad::matmul_nt(ad::matmul(z, wq), ad::matmul(s, wk));
  const Var alpha = ad::masked_softmax_rows(logits, exclusion_mask(batch, set));
  const Var probs = ad::matmul(alpha, tape.constant(set.labels));
  const Var total = ad::mean_nll(probs, batch.targets);
  tape.backward(total);

  LossGrad out;
  out.value = total.value()(0, 0);
  append_gradients(backbone, out.grads);
  append_gradients(encoder, out.grads);
  out.grads.push_back(grad_or_zero(wq));
  out.grads.push_back(grad_or_zero(wk));
  return out;
}

double loss(const SpmClassifier& model, const QueryBatch& batch, const SetBatch& set) {
  check_batch(model, batch, set);
  const std::size_t m = set.source_ids.size();
  const auto keep = exclusion_mask(batch, set);
  const Mat q = matmul(latent(model, batch.x), model.w_query);
  const Mat k = matmul(forward(model.encoder, set.x), model.w_key);
  const Mat logits = matmul_nt(q, k);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.x.rows(); ++b) {
    std::vector<double> live;
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < m; ++j) {
      if (!keep[b * m + j]) continue;
      live.push_back(logits(b, j));
      idx.push_back(j);
    }
    const auto alpha = softmax(live);
    double p = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) p += alpha[j] * set.labels(idx[j], batch.targets[b]);
    total -= std::log(std::max(p, kProbFloor));
  }
  return total / static_cast<double>(batch.x.rows());
}

SpmClassifier fit(const SpmConfig& config, const LabeledDataset& train, std::uint64_t seed) {
  config.validate();
  train.validate();
  if (train.dim() != config.input_dim) throw ShapeError("fit: dataset width differs from config");
  if (train.num_classes != config.num_classes) throw ShapeError("fit: class count differs from config");
  if (train.size() < 2) throw DomainError("fit: need at least two training rows");

  SpmClassifier model = init_classifier(config, seed);
  Rng rng(mix_seed(seed));
  Adam adam(AdamHyper{config.lr});
  const std::size_t n = train.size();
  const std::size_t m = std::min(config.set_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto params = model.parameters();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const auto pi = config.label_perm ? LabelPermutation::random(config.num_classes, rng)
                                        : LabelPermutation::identity(config.num_classes);
      const auto set_idx = sample_inputted_set(n, m, std::nullopt, rng);

      QueryBatch batch;
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      batch.x = train.x.gather_rows(rows);
      for (std::size_t r : rows) {
        batch.targets.push_back(pi(train.y[r]));
        batch.source_ids.emplace_back(r);
      }
      SetBatch set;
      set.x = train.x.gather_rows(set_idx);
      std::vector<std::size_t> set_labels;
      for (std::size_t r : set_idx) set_labels.push_back(pi(train.y[r]));
      set.labels = one_hot(set_labels, config.num_classes);
      set.source_ids = set_idx;

      auto lg = loss_and_grad(model, batch, set);
      if (!std::isfinite(lg.value)) throw DivergenceError("fit: non-finite training loss");
      adam.step(params, lg.grads);
    }
  }
  model.train_accuracy = self_excluded_accuracy(model, train);
  return model;
}

double self_excluded_accuracy(const SpmClassifier& model, const LabeledDataset& train) {
  const InstanceSet set = encode_set(model, train);
  const Mat q = matmul(latent(model, train.x), model.w_query);
  const Mat k = matmul(set.embeddings, model.w_key);
  const Mat logits = matmul_nt(q, k);
  std::size_t correct = 0;
  std::vector<double> live;
  for (std::size_t b = 0; b < train.size(); ++b) {
    live.assign(logits.row(b).begin(), logits.row(b).end());
    live[b] = -std::numeric_limits<double>::infinity();
    const auto alpha = softmax(live);
    std::vector<double> p(model.config.num_classes, 0.0);
    for (std::size_t i = 0; i < alpha.size(); ++i) p[train.y[i]] += alpha[i];
    if (argmax(p) == train.y[b]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(train.size());
}

}  // namespace spmu
