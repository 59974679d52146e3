#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "spmu/data/dataset.hpp"
#include "spmu/gen/denoiser.hpp"
#include "spmu/metrics/metrics.hpp"
#include "spmu/spm/classifier.hpp"
#include "spmu/spm/reduce.hpp"
#include "spmu/unlearn/knn.hpp"
#include "spmu/unlearn/parametric.hpp"

namespace spmu {

inline constexpr int kCheckpointFormat = 1;

nlohmann::json to_json(const SpmConfig& c);
nlohmann::json to_json(const GenConfig& c);
nlohmann::json to_json(const ParametricConfig& c);

/// Missing keys keep their defaults; wrong types or values throw
/// ValidationError naming `prefix` + key.
SpmConfig spm_config_from_json(const nlohmann::json& j, const std::string& prefix = "");
GenConfig gen_config_from_json(const nlohmann::json& j, const std::string& prefix = "");
ParametricConfig parametric_config_from_json(const nlohmann::json& j, const std::string& prefix = "");

std::string reduction_name(Reduction r);
Reduction reduction_from_name(const std::string& name);

/// Parameters are stored flattened in declaration order.
nlohmann::json save_weights(const std::vector<const Mat*>& params);
void load_weights(const nlohmann::json& flat, const std::vector<Mat*>& params);

/// Self-contained 2-D-capable predictors: weights plus whatever inputted set
/// or index the prediction reads.
nlohmann::json checkpoint_spm(const SpmPredictor& p, const Mat& member_x);
nlohmann::json checkpoint_knn(const KnnIndex& index, std::size_t k);
nlohmann::json checkpoint_parametric(const ParametricClassifier& m);
nlohmann::json checkpoint_gen(const SpmDenoiser& m);

/// A classifier checkpoint of any kind, ready to predict.
struct LoadedClassifier {
  std::string kind;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  ProbaFn predict;
};

/// Throws ValidationError on a malformed or unknown checkpoint.
LoadedClassifier load_classifier(const nlohmann::json& j);
SpmDenoiser load_gen(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace spmu
