#include "embreg/experiments.hpp"
#include "embreg/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <sstream>

using namespace embreg;

namespace {

struct Csv {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind('#', 0) == 0) {
      csv.comments.push_back(line);
    } else if (csv.header.empty()) {
      csv.header = split(line);
    } else {
      csv.rows.push_back(split(line));
    }
  }
  return csv;
}

std::size_t column(const Csv& csv, const std::string& name) {
  for (std::size_t i = 0; i < csv.header.size(); ++i) {
    if (csv.header[i] == name) return i;
  }
  ADD_FAILURE() << "no column " << name;
  return 0;
}

CellResult fake(Cell c, double pr, double f1) {
  CellResult r;
  r.cell = c;
  RunRecord rec;
  rec.test = {pr, f1};
  r.record = rec;
  return r;
}

const Dataset& tiny() {
  static const Dataset d = [] {
    SynthSpec s;
    s.num_examples = 40;
    s.clip_seconds = 2.0;
    s.seed = 21;
    return generate(s);
  }();
  return d;
}

}  // namespace

TEST(Median, OddAndEven) {
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), ArgumentError);
}

TEST(GridCells, NoneOnceThenEveryMethodAndFeature) {
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto cells = grid_cells(seeds);
  EXPECT_EQ(cells.size(), (1 + 5 * 3) * seeds.size());
  std::map<Method, int> per_method;
  for (const Cell& c : cells) ++per_method[c.method];
  EXPECT_EQ(per_method[Method::None], 3);
  EXPECT_EQ(per_method[Method::ConReg], 9);
}

TEST(GridCsv, ShapeAndSingleMaxFlagPerMetric) {
  const std::vector<std::uint64_t> seeds{1, 2};
  std::vector<CellResult> results;
  double v = 0.1;
  for (const Cell& c : grid_cells(seeds)) {
    results.push_back(fake(c, v, 1.0 - v));
    v += 0.01;
  }
  results[5].record.reset();
  results[5].error = "boom, with comma";
  const Csv csv = parse_csv(grid_csv(results, seeds, ExperimentConfig{}));
  EXPECT_FALSE(csv.comments.empty());
  ASSERT_EQ(csv.rows.size(), 16u);
  ASSERT_EQ(csv.header.size(), 2u + 2 * (seeds.size() + 2) + 1);
  for (const auto& row : csv.rows) ASSERT_EQ(row.size(), csv.header.size());

  for (const char* flag : {"pr_auc_max", "f1_max"}) {
    const std::size_t col = column(csv, flag);
    int marked = 0;
    for (const auto& row : csv.rows) marked += row[col] == "1";
    EXPECT_EQ(marked, 1) << flag;
  }
  // Highest PR-AUC is the last row, highest F1 the first.
  EXPECT_EQ(csv.rows.back()[column(csv, "pr_auc_max")], "1");
  EXPECT_EQ(csv.rows.front()[column(csv, "f1_max")], "1");
  EXPECT_EQ(csv.rows.front()[0], "none");

  int errors = 0;
  for (const auto& row : csv.rows) errors += row.back().rfind("error", 0) == 0;
  EXPECT_EQ(errors, 1);
}

TEST(AblationCells, FractionsMethodsSeeds) {
  const auto cells = ablation_cells(kAblationFractions, {1, 2, 3});
  EXPECT_EQ(cells.size(), 5u * 2 * 3);
  for (const Cell& c : cells) {
    EXPECT_TRUE(c.method == Method::None || c.method == Method::ConReg);
    EXPECT_EQ(c.kind, FeatureKind::Combined);
  }
}

TEST(AblationPlot, ColumnsAndStatistics) {
  std::vector<CellResult> results;
  for (const Cell& c : ablation_cells({0.1, 0.5}, {1, 2, 3})) {
    results.push_back(fake(c, 0.5 + 0.1 * static_cast<double>(c.seed), 0.0));
  }
  const Csv csv = parse_csv(ablation_plot_csv(results, ValMetric::PrAuc));
  ASSERT_EQ(csv.header, (std::vector<std::string>{"fraction", "method", "median", "min", "max"}));
  ASSERT_EQ(csv.rows.size(), 4u);
  EXPECT_EQ(csv.rows[0][2], "0.700000");
  EXPECT_EQ(csv.rows[0][3], "0.600000");
  EXPECT_EQ(csv.rows[0][4], "0.800000");
  EXPECT_EQ(parse_csv(ablation_runs_csv(results, ExperimentConfig{})).rows.size(), 12u);
}

TEST(ParamsTable, CountRelations) {
  const Csv csv = parse_csv(params_table(ModelSpec{}));
  ASSERT_EQ(csv.rows.size(), 6u);
  std::map<std::string, std::vector<long long>> t;
  for (const auto& row : csv.rows) {
    for (std::size_t i = 1; i < row.size(); ++i) t[row[0]].push_back(std::stoll(row[i]));
  }
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(t["con-reg"][3 + k], t["none"][3 + k]);
    EXPECT_EQ(t["dis-reg"][3 + k], t["none"][3 + k]);
    for (const auto& [name, counts] : t) {
      if (name != "feature-only") EXPECT_LT(t["feature-only"][k], counts[k]) << name;
    }
  }
  for (const char* m : {"concat", "film", "feature-only"}) {
    EXPECT_GT(t[m][5], t[m][3]);
    EXPECT_GT(t[m][5], t[m][4]);
  }
}

TEST(RunRecord, JsonRoundTrip) {
  ExperimentConfig c;
  c.method = Method::DisReg;
  c.epochs = 1;
  c.batch_size = 8;
  ModelSpec s;
  s.num_blocks = 1;
  RunRecord r = make_record(train(c, tiny(), s), true);
  ASSERT_TRUE(r.wall_time_s);
  const RunRecord back = run_record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_TRUE(back == r);
  EXPECT_EQ(back.config.effective_alpha(), 1.0);
  EXPECT_EQ(back.test.pr_auc, r.test.pr_auc);
  EXPECT_FALSE(make_record(train(c, tiny(), s)).wall_time_s);
}

TEST(RunCells, ThreadCountDoesNotChangeResults) {
  ExperimentConfig base;
  base.epochs = 1;
  base.batch_size = 8;
  ModelSpec s;
  s.num_blocks = 1;
  const std::vector<std::uint64_t> seeds{1, 2};
  std::vector<Cell> cells = grid_cells(seeds);
  cells.resize(8);
  const auto serial = run_cells(cells, base, tiny(), s, 1);
  const auto parallel = run_cells(cells, base, tiny(), s, 3);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    ASSERT_TRUE(serial[i].record && parallel[i].record);
    EXPECT_TRUE(*serial[i].record == *parallel[i].record) << i;
  }
}

TEST(RunCells, FailingCellIsRecordedAndOthersRun) {
  ExperimentConfig base;
  base.epochs = 1;
  base.batch_size = 8;
  ModelSpec s;
  s.num_blocks = 1;
  std::vector<Cell> cells{{Method::None, FeatureKind::A, 0.001, 1}, {Method::None, FeatureKind::A, 1.0, 1}};
  const auto out = run_cells(cells, base, tiny(), s, 1);
  EXPECT_FALSE(out[0].record);
  EXPECT_FALSE(out[0].error.empty());
  EXPECT_TRUE(out[1].record);
}

TEST(RunCells, WritesPerCellFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "embreg_cells_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ExperimentConfig base;
  base.epochs = 1;
  base.batch_size = 8;
  ModelSpec s;
  s.num_blocks = 1;
  run_cells({{Method::ConReg, FeatureKind::B, 1.0, 7}}, base, tiny(), s, 1, dir);
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) files += entry.path().extension() == ".json";
  EXPECT_EQ(files, 1);
  std::filesystem::remove_all(dir);
}
