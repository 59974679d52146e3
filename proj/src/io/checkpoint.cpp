#include "spmu/io/checkpoint.hpp"

#include <fstream>

#include "spmu/numeric/errors.hpp"
#include "spmu/numeric/ops.hpp"

namespace spmu {

using nlohmann::json;

namespace {

template <class T>
void read_field(const json& j, const char* key, const std::string& prefix, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(prefix + key, std::string("wrong type: ") + e.what());
  }
}

void require_object(const json& j, const std::string& field) {
  if (!j.is_object()) throw ValidationError(field.empty() ? "config" : field, "expected an object");
}

template <class Config>
Config checked(Config c, const std::string& prefix) {
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ValidationError(prefix.empty() ? "model" : prefix.substr(0, prefix.size() - 1), e.what());
  }
  return c;
}

json mat_rows(const Mat& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Mat rows_mat(const json& j, const std::string& field) {
  try {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return Mat();
    Mat m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols()) throw ValidationError(field, "ragged rows");
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(field, e.what());
  }
}

const json& member(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(key, "missing field");
  return j.at(key);
}

void check_header(const json& j, const char* kind) {
  if (!j.is_object()) throw ValidationError("checkpoint", "expected an object");
  if (j.value("format_version", -1) != kCheckpointFormat) {
    throw ValidationError("format_version", "unsupported checkpoint format");
  }
  if (kind && j.value("kind", std::string()) != kind) throw ValidationError("kind", "unexpected checkpoint kind");
}

json header(const char* kind) { return json{{"format_version", kCheckpointFormat}, {"kind", kind}}; }

}  // namespace

json to_json(const SpmConfig& c) {
  return json{{"input_dim", c.input_dim},   {"num_classes", c.num_classes}, {"hidden", c.hidden},
              {"embed_dim", c.embed_dim},   {"attn_dim", c.attn_dim},       {"set_size", c.set_size},
              {"batch_size", c.batch_size}, {"epochs", c.epochs},           {"lr", c.lr},
              {"label_perm", c.label_perm}};
}

json to_json(const GenConfig& c) {
  return json{{"input_dim", c.input_dim},     {"num_classes", c.num_classes}, {"down_hidden", c.down_hidden},
              {"up_hidden", c.up_hidden},     {"width", c.width},             {"time_dim", c.time_dim},
              {"steps_t", c.steps_t},         {"set_size", c.set_size},       {"batch_size", c.batch_size},
              {"train_steps", c.train_steps}, {"lr", c.lr},                   {"label_perm", c.label_perm}};
}

json to_json(const ParametricConfig& c) {
  return json{{"input_dim", c.input_dim},   {"num_classes", c.num_classes}, {"hidden", c.hidden},
              {"batch_size", c.batch_size}, {"epochs", c.epochs},           {"lr", c.lr}};
}

SpmConfig spm_config_from_json(const json& j, const std::string& prefix) {
  require_object(j, prefix);
  SpmConfig c;
  read_field(j, "input_dim", prefix, c.input_dim);
  read_field(j, "num_classes", prefix, c.num_classes);
  read_field(j, "hidden", prefix, c.hidden);
  read_field(j, "embed_dim", prefix, c.embed_dim);
  read_field(j, "attn_dim", prefix, c.attn_dim);
  read_field(j, "set_size", prefix, c.set_size);
  read_field(j, "batch_size", prefix, c.batch_size);
  read_field(j, "epochs", prefix, c.epochs);
  read_field(j, "lr", prefix, c.lr);
  read_field(j, "label_perm", prefix, c.label_perm);
  return checked(c, prefix);
}

GenConfig gen_config_from_json(const json& j, const std::string& prefix) {
  require_object(j, prefix);
  GenConfig c;
  read_field(j, "input_dim", prefix, c.input_dim);
  read_field(j, "num_classes", prefix, c.num_classes);
  read_field(j, "down_hidden", prefix, c.down_hidden);
  read_field(j, "up_hidden", prefix, c.up_hidden);
  read_field(j, "width", prefix, c.width);
  read_field(j, "time_dim", prefix, c.time_dim);
  read_field(j, "steps_t", prefix, c.steps_t);
  read_field(j, "set_size", prefix, c.set_size);
  read_field(j, "batch_size", prefix, c.batch_size);
  read_field(j, "train_steps", prefix, c.train_steps);
  read_field(j, "lr", prefix, c.lr);
  read_field(j, "label_perm", prefix, c.label_perm);
  return checked(c, prefix);
}

ParametricConfig parametric_config_from_json(const json& j, const std::string& prefix) {
  require_object(j, prefix);
  ParametricConfig c;
  read_field(j, "input_dim", prefix, c.input_dim);
  read_field(j, "num_classes", prefix, c.num_classes);
  read_field(j, "hidden", prefix, c.hidden);
  read_field(j, "batch_size", prefix, c.batch_size);
  read_field(j, "epochs", prefix, c.epochs);
  read_field(j, "lr", prefix, c.lr);
  return checked(c, prefix);
}

std::string reduction_name(Reduction r) {
  switch (r) {
    case Reduction::full: return "full";
    case Reduction::retrieval: return "retrieval";
    case Reduction::clustering: return "clustering";
  }
  return "full";
}

Reduction reduction_from_name(const std::string& name) {
  if (name == "full") return Reduction::full;
  if (name == "retrieval") return Reduction::retrieval;
  if (name == "clustering") return Reduction::clustering;
  throw ValidationError("reduction", "unknown reduction '" + name + "'");
}

json save_weights(const std::vector<const Mat*>& params) {
  std::vector<double> flat;
  for (const Mat* m : params) flat.insert(flat.end(), m->values().begin(), m->values().end());
  return flat;
}

void load_weights(const json& flat, const std::vector<Mat*>& params) {
  std::vector<double> v;
  try {
    v = flat.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ValidationError("weights", e.what());
  }
  std::size_t total = 0;
  for (const Mat* m : params) total += m->size();
  if (v.size() != total) throw ValidationError("weights", "parameter count does not match config");
  std::size_t pos = 0;
  for (Mat* m : params) {
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(pos), v.begin() + static_cast<std::ptrdiff_t>(pos + m->size()),
              m->values().begin());
    pos += m->size();
  }
}

json checkpoint_spm(const SpmPredictor& p, const Mat& member_x) {
  const InstanceSet& set = p.members();
  if (member_x.rows() != set.size()) throw ShapeError("checkpoint_spm: member rows mismatch");
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < set.size(); ++i) y.push_back(argmax(set.labels.row(i)));
  json j = header("spm");
  j["config"] = to_json(p.model().config);
  j["weights"] = save_weights(p.model().parameters());
  j["reduction"] = reduction_name(p.mode());
  j["k"] = p.k();
  j["set"] = json{{"x", mat_rows(member_x)}, {"y", y}, {"source_ids", set.source_ids}};
  return j;
}

json checkpoint_knn(const KnnIndex& index, std::size_t k) {
  json j = header("knn");
  j["k"] = k;
  j["num_classes"] = index.num_classes;
  j["x"] = mat_rows(index.x);
  j["y"] = index.y;
  j["source_ids"] = index.source_ids;
  return j;
}

json checkpoint_parametric(const ParametricClassifier& m) {
  json j = header("parametric");
  j["config"] = to_json(m.config);
  j["weights"] = save_weights(m.parameters());
  return j;
}

json checkpoint_gen(const SpmDenoiser& m) {
  json j = header("spm_gen");
  j["config"] = to_json(m.config);
  j["weights"] = save_weights(m.parameters());
  return j;
}

LoadedClassifier load_classifier(const json& j) {
  check_header(j, nullptr);
  const std::string kind = j.value("kind", std::string());
  LoadedClassifier out;
  out.kind = kind;
  if (kind == "spm") {
    SpmClassifier model = init_classifier(spm_config_from_json(member(j, "config"), "config."), 0);
    load_weights(member(j, "weights"), model.parameters());
    const json& set = member(j, "set");
    const Mat x = rows_mat(member(set, "x"), "set.x");
    std::vector<std::size_t> y, ids;
    try {
      y = member(set, "y").get<std::vector<std::size_t>>();
      ids = member(set, "source_ids").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      throw ValidationError("set", e.what());
    }
    for (std::size_t c : y)
      if (c >= model.config.num_classes) throw ValidationError("set.y", "label out of range");
    InstanceSet members = encode_set(model, x, one_hot(y, model.config.num_classes), std::move(ids));
    const Reduction mode = reduction_from_name(j.value("reduction", std::string("full")));
    SpmPredictor p(model, std::move(members), mode, j.value("k", std::size_t{0}));
    out.input_dim = model.config.input_dim;
    out.num_classes = model.config.num_classes;
    out.predict = [p](const Mat& q) { return p.predict_proba(q); };
  } else if (kind == "knn") {
    KnnIndex index;
    index.x = rows_mat(member(j, "x"), "x");
    try {
      index.y = member(j, "y").get<std::vector<std::size_t>>();
      index.source_ids = member(j, "source_ids").get<std::vector<std::size_t>>();
      index.num_classes = member(j, "num_classes").get<std::size_t>();
    } catch (const json::exception& e) {
      throw ValidationError("knn", e.what());
    }
    const std::size_t k = j.value("k", kDefaultKnnK);
    out.input_dim = index.x.cols();
    out.num_classes = index.num_classes;
    out.predict = [index, k](const Mat& q) { return knn_predict_proba(index, q, k); };
  } else if (kind == "parametric") {
    ParametricClassifier model = init_parametric(parametric_config_from_json(member(j, "config"), "config."), 0);
    load_weights(member(j, "weights"), model.parameters());
    out.input_dim = model.config.input_dim;
    out.num_classes = model.config.num_classes;
    out.predict = [model](const Mat& q) { return model.predict_proba(q); };
  } else {
    throw ValidationError("kind", "not a classifier checkpoint: '" + kind + "'");
  }
  return out;
}

SpmDenoiser load_gen(const json& j) {
  check_header(j, "spm_gen");
  SpmDenoiser model = init_denoiser(gen_config_from_json(member(j, "config"), "config."), 0);
  load_weights(member(j, "weights"), model.parameters());
  return model;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace spmu
