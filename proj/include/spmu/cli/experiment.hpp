#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spmu/data/dataset.hpp"
#include "spmu/gen/denoiser.hpp"
#include "spmu/spm/classifier.hpp"
#include "spmu/spm/reduce.hpp"
#include "spmu/unlearn/parametric.hpp"

namespace spmu {

inline constexpr int kConfigVersion = 1;
inline constexpr const char* kOutputRootEnv = "SPMU_OUTPUT_ROOT";

struct OutlierSpec {
  std::vector<double> center;
  double sigma = 0.15;
  std::size_t count = 20;
  std::size_t label = 1;
};

struct DatasetSpec {
  std::string kind = "moons";  // moons | blobs | csv
  std::size_t per_class = 150;
  double noise = 0.1;
  std::size_t num_classes = 3;
  std::vector<std::vector<double>> centers;  // blobs; default is a circle of radius 2
  double sigma = 0.4;
  std::optional<OutlierSpec> outliers;
  std::string csv_path;
  double test_fraction = 0.2;
};

struct ModelSpec {
  std::string kind = "spm";  // spm | knn | parametric | spm_gen | gmm
  SpmConfig spm;
  Reduction reduction = Reduction::full;
  std::size_t retrieval_k = 32;
  ParametricConfig parametric;
  GenConfig gen;
  std::size_t knn_k = 15;
  std::size_t gmm_components = 8;
  std::size_t gmm_iters = 50;
};

struct ForgetConfig {
  std::string mode = "classes";  // classes | indices | random | outliers
  std::vector<std::size_t> classes;
  std::vector<std::size_t> indices;
  double fraction = 0.1;
  std::optional<std::size_t> replacement;  // generative class substitution
};

struct GridSpec {
  std::optional<std::array<double, 4>> extent;  // x0_lo, x0_hi, x1_lo, x1_hi; default: data box plus margin
  double margin = 0.1;
  std::size_t resolution = 200;
};

struct BaselineSpec {
  std::size_t ga_steps = 50;
  double ga_lr = 1e-3;
  std::size_t ft_steps = 500;
  double ft_lr = 1e-3;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  DatasetSpec dataset;
  ModelSpec model;
  ForgetConfig forget;
  std::vector<std::string> methods;
  bool pg_on_retain = false;
  std::optional<GridSpec> grid;
  std::size_t gen_samples = 300;
  BaselineSpec baselines;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  nlohmann::json raw;  // echoed into the report
};

/// Throws ValidationError naming the offending field.
ExperimentConfig parse_experiment(const nlohmann::json& j);

/// Output directory: $SPMU_OUTPUT_ROOT (or the working directory) joined with output_dir.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

/// Dataset for one seed. Outlier rows, if any, are appended after the first
/// `base_rows` rows.
struct BuiltData {
  LabeledDataset data;
  std::size_t base_rows = 0;
};
BuiltData build_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// Runs every seed, writes report.json, results.csv, grid and sample CSVs and
/// checkpoints of the first seed into `out_dir`, and returns the report.
nlohmann::json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Row-major grid over [x0_lo, x0_hi] x [x1_lo, x1_hi], x0 varying slowest.
Mat make_grid(const std::array<double, 4>& extent, std::size_t resolution);

/// CSV with header x0,x1,pred,prob_0..prob_{C-1}.
void write_grid_csv(const std::filesystem::path& path, const Mat& points, const Mat& probs);

}  // namespace spmu
