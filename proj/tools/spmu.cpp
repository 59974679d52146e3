#include <glob.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "spmu/cli/experiment.hpp"
#include "spmu/cli/selftest.hpp"
#include "spmu/io/checkpoint.hpp"
#include "spmu/metrics/report.hpp"
#include "spmu/numeric/errors.hpp"

namespace {

using nlohmann::json;
using namespace spmu;

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int fail(const std::string& kind, const std::string& message, const std::string& field, int code) {
  json err{{"error", kind}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  std::cerr << err.dump() << '\n';
  return code;
}

int cmd_run(const std::string& config_path) {
  const ExperimentConfig cfg = parse_experiment(read_json_file(config_path));
  const auto out = resolve_output_dir(cfg);
  run_experiment(cfg, out);
  std::cout << (out / "report.json").string() << '\n';
  return 0;
}

int cmd_grid(const std::vector<std::string>& models, const std::vector<double>& extent, std::size_t resolution,
             const std::string& out_dir) {
  if (extent.size() != 4 || !(extent[0] < extent[1] && extent[2] < extent[3])) {
    throw ValidationError("extent", "expected x0_lo x0_hi x1_lo x1_hi with lo < hi");
  }
  if (resolution < 2) throw ValidationError("resolution", "must be at least 2");
  const Mat pts = make_grid({extent[0], extent[1], extent[2], extent[3]}, resolution);
  std::filesystem::path out = out_dir;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root && out.is_relative()) out = root / out;
  std::filesystem::create_directories(out);
  for (const std::string& spec : models) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("model", "expected name=checkpoint, got " + spec);
    const std::string name = spec.substr(0, eq);
    const LoadedClassifier model = load_classifier(read_json_file(spec.substr(eq + 1)));
    if (model.input_dim != 2) throw ValidationError("model", "boundary grids need a 2-D model: " + name);
    const auto path = out / ("grid_" + name + ".csv");
    write_grid_csv(path, pts, model.predict(pts));
    std::cout << path.string() << '\n';
  }
  return 0;
}

std::vector<std::string> expand(const std::vector<std::string>& patterns) {
  std::vector<std::string> paths;
  for (const std::string& p : patterns) {
    glob_t g{};
    if (glob(p.c_str(), 0, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
  }
  return paths;
}

int cmd_table(const std::vector<std::string>& patterns) {
  const auto paths = expand(patterns);
  if (paths.empty()) throw ValidationError("reports", "no report matched");
  std::vector<TableRow> rows;
  for (const std::string& path : paths) {
    try {
      const auto r = table_rows(read_json_file(path));
      rows.insert(rows.end(), r.begin(), r.end());
    } catch (const Error& e) {
      std::cerr << "warning: skipping " << path << ": " << e.what() << '\n';
    }
  }
  if (rows.empty()) throw ValidationError("reports", "no readable report");
  std::string header;
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) header += (i ? "," : "") + kTableColumns[i];
  std::cout << header << '\n';
  for (const TableRow& r : rows) std::cout << csv_line(r) << '\n';
  for (const TableRow& r : aggregate_rows(rows)) std::cout << csv_line(r) << '\n';
  return 0;
}

int cmd_selftest() {
  bool ok = true;
  for (const CheckResult& r : run_selftest()) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) std::cout << " (" << r.detail << ')';
    std::cout << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-parametric model unlearning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Train, unlearn, retrain the oracle and report");
  run->add_option("config", config_path, "Experiment config JSON")->required();

  std::vector<std::string> models;
  std::vector<double> extent;
  std::size_t resolution = 200;
  std::string grid_out = "grids";
  auto* grid = app.add_subcommand("grid", "Evaluate checkpoints on a regular 2-D grid");
  grid->add_option("--model", models, "name=checkpoint.json")->required();
  grid->add_option("--extent", extent, "x0_lo x0_hi x1_lo x1_hi")->required()->expected(4);
  grid->add_option("--resolution", resolution, "Points per axis");
  grid->add_option("--out", grid_out, "Output directory");

  std::vector<std::string> patterns;
  auto* table = app.add_subcommand("table", "Collect report rows into one CSV table");
  table->add_option("reports", patterns, "Report paths or glob patterns")->required();

  auto* selftest = app.add_subcommand("selftest", "Run the invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), "", kExitValidation);
  }

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (grid->parsed()) return cmd_grid(models, extent, resolution, grid_out);
    if (table->parsed()) return cmd_table(patterns);
    if (selftest->parsed()) return cmd_selftest();
  } catch (const ValidationError& e) {
    return fail("validation", e.what(), e.field(), kExitValidation);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), "", kExitRuntime);
  }
  return kExitValidation;
}
