#pragma once

#include "embreg/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace embreg {

/// Persistent outcome of one training run.
struct RunRecord {
  ExperimentConfig config;
  ModelSpec spec;
  std::size_t train_examples = 0;
  Index best_epoch = -1;
  EvalResult val;
  EvalResult test;
  std::int64_t training_params = 0;
  std::int64_t inference_params = 0;
  bool needs_features_at_inference = false;
  std::optional<double> wall_time_s;
  std::string build_id;

  friend bool operator==(const RunRecord&, const RunRecord&);
};

/// git-describe style identifier captured at configure time.
std::string build_id();

RunRecord make_record(const TrainReport& report, bool keep_wall_time = false);
nlohmann::ordered_json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

/// One training run of a grid or ablation.
struct Cell {
  Method method;
  FeatureKind kind;
  double train_fraction;
  std::uint64_t seed;
};

struct CellResult {
  Cell cell;
  std::optional<RunRecord> record;
  std::string error;
};

/// Cap on concurrent cells: EMBREG_THREADS when set, else the hardware concurrency.
unsigned thread_cap();

/// Trains every cell on a worker pool. Results come back in cell order, and
/// each cell is deterministic, so the outcome does not depend on `threads`.
/// A failing cell records its error; the others still run. When `cell_dir` is
/// set, each finished cell writes its RunRecord there.
std::vector<CellResult> run_cells(const std::vector<Cell>& cells, const ExperimentConfig& base, const Dataset& data,
                                  const ModelSpec& spec, unsigned threads,
                                  const std::optional<std::filesystem::path>& cell_dir = std::nullopt);

double median(std::vector<double> values);

// Method x feature grid -----------------------------------------------------

/// None once, then every feature-using method on A, B and Combined; each row
/// repeated per seed.
std::vector<Cell> grid_cells(const std::vector<std::uint64_t>& seeds);

/// One row per method/feature pair with per-seed test PR-AUC and F1, their
/// medians, and a max flag marking the single best median in each metric.
std::string grid_csv(const std::vector<CellResult>& results, const std::vector<std::uint64_t>& seeds,
                     const ExperimentConfig& base);

// Training-fraction ablation -------------------------------------------------

inline const std::vector<double> kAblationFractions = {0.1, 0.3, 0.5, 0.7, 0.9};

/// Method None and Con-Reg on combined features at every fraction and seed.
std::vector<Cell> ablation_cells(const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds);

/// Per-run rows: fraction, method, features, seed, test PR-AUC, test F1.
std::string ablation_runs_csv(const std::vector<CellResult>& results, const ExperimentConfig& base);

/// Plot series: fraction, method, median, min, max of the chosen test metric.
std::string ablation_plot_csv(const std::vector<CellResult>& results, ValMetric metric);

// Parameter audit ------------------------------------------------------------

/// Training and inference parameter counts for every method and feature kind.
std::string params_table(const ModelSpec& spec, const ExtractorCosts& costs = {});

}  // namespace embreg
