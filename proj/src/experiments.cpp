#include "embreg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#ifndef EMBREG_BUILD_ID
#define EMBREG_BUILD_ID "unknown"
#endif

namespace embreg {

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

nlohmann::ordered_json spec_json(const ModelSpec& s) {
  nlohmann::ordered_json j;
  j["input_bins"] = s.input_bins;
  j["embed_dim"] = s.embed_dim;
  j["num_blocks"] = s.num_blocks;
  j["decoder_hidden"] = s.decoder_hidden;
  j["num_classes"] = s.num_classes;
  j["pool_factor_per_block"] = s.pool_factor_per_block;
  return j;
}

void config_comments(std::ostream& os, const ExperimentConfig& base) {
  os << "# build=" << build_id() << '\n';
  os << "# lr=" << base.lr << " batch_size=" << base.batch_size << " epochs=" << base.epochs
     << " patience=" << base.patience << " metric=" << to_string(base.metric) << '\n';
  if (base.alpha) os << "# alpha=" << *base.alpha << '\n';
}

std::string cell_label(const Cell& c) {
  return std::string(to_string(c.method)) + (c.method == Method::None ? "" : "_" + std::string(to_string(c.kind))) +
         "_f" + fixed(c.train_fraction).substr(0, 4) + "_s" + std::to_string(c.seed);
}

}  // namespace

std::string build_id() { return EMBREG_BUILD_ID; }

bool operator==(const RunRecord& a, const RunRecord& b) { return to_json(a) == to_json(b); }

RunRecord make_record(const TrainReport& report, bool keep_wall_time) {
  RunRecord r;
  r.config = report.config;
  r.spec = report.spec;
  r.train_examples = report.train_examples;
  r.best_epoch = report.best_epoch;
  r.val = report.val;
  r.test = report.test;
  r.training_params = report.training_params;
  r.inference_params = report.inference_params;
  r.needs_features_at_inference = needs_features_at_inference(report.config.method);
  if (keep_wall_time) r.wall_time_s = report.wall_time_s;
  r.build_id = build_id();
  return r;
}

nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["config"] = config_json(r.config);
  j["spec"] = spec_json(r.spec);
  j["train_examples"] = r.train_examples;
  j["best_epoch"] = r.best_epoch;
  j["val"] = {{"pr_auc", r.val.pr_auc}, {"f1", r.val.f1}};
  j["test"] = {{"pr_auc", r.test.pr_auc}, {"f1", r.test.f1}};
  j["training_params"] = r.training_params;
  j["inference_params"] = r.inference_params;
  j["needs_features_at_inference"] = r.needs_features_at_inference;
  if (r.wall_time_s) j["wall_time_s"] = *r.wall_time_s;
  j["build_id"] = r.build_id;
  return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  const auto& c = j.at("config");
  r.config.method = parse_method(c.at("method").get<std::string>());
  r.config.feature_kind = parse_feature_kind(c.at("features").get<std::string>());
  r.config.alpha = c.at("alpha").get<double>();
  r.config.lr = c.at("lr").get<double>();
  r.config.batch_size = c.at("batch_size").get<Index>();
  r.config.epochs = c.at("epochs").get<Index>();
  r.config.train_fraction = c.at("train_fraction").get<double>();
  r.config.seed = c.at("seed").get<std::uint64_t>();
  r.config.patience = c.at("patience").get<Index>();
  r.config.metric = parse_val_metric(c.at("metric").get<std::string>());
  const auto& s = j.at("spec");
  r.spec.input_bins = s.at("input_bins").get<Index>();
  r.spec.embed_dim = s.at("embed_dim").get<Index>();
  r.spec.num_blocks = s.at("num_blocks").get<Index>();
  r.spec.decoder_hidden = s.at("decoder_hidden").get<Index>();
  r.spec.num_classes = s.at("num_classes").get<Index>();
  r.spec.pool_factor_per_block = s.at("pool_factor_per_block").get<Index>();
  r.train_examples = j.at("train_examples").get<std::size_t>();
  r.best_epoch = j.at("best_epoch").get<Index>();
  r.val = {j.at("val").at("pr_auc").get<double>(), j.at("val").at("f1").get<double>()};
  r.test = {j.at("test").at("pr_auc").get<double>(), j.at("test").at("f1").get<double>()};
  r.training_params = j.at("training_params").get<std::int64_t>();
  r.inference_params = j.at("inference_params").get<std::int64_t>();
  r.needs_features_at_inference = j.at("needs_features_at_inference").get<bool>();
  if (j.contains("wall_time_s")) r.wall_time_s = j.at("wall_time_s").get<double>();
  r.build_id = j.at("build_id").get<std::string>();
  return r;
}

unsigned thread_cap() {
  if (const char* env = std::getenv("EMBREG_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<CellResult> run_cells(const std::vector<Cell>& cells, const ExperimentConfig& base, const Dataset& data,
                                  const ModelSpec& spec, unsigned threads,
                                  const std::optional<std::filesystem::path>& cell_dir) {
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      CellResult& out = results[i];
      out.cell = cell;
      ExperimentConfig cfg = base;
      cfg.method = cell.method;
      cfg.feature_kind = cell.kind;
      cfg.train_fraction = cell.train_fraction;
      cfg.seed = cell.seed;
      try {
        out.record = make_record(train(cfg, data, spec));
        if (cell_dir) {
          std::ofstream f(*cell_dir / (cell_label(cell) + ".json"));
          f << to_json(*out.record).dump(2) << '\n';
        }
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

std::vector<Cell> grid_cells(const std::vector<std::uint64_t>& seeds) {
  std::vector<Cell> cells;
  for (std::uint64_t s : seeds) cells.push_back({Method::None, FeatureKind::Combined, 1.0, s});
  for (Method m : kAllMethods) {
    if (m == Method::None) continue;
    for (FeatureKind k : {FeatureKind::A, FeatureKind::B, FeatureKind::Combined}) {
      for (std::uint64_t s : seeds) cells.push_back({m, k, 1.0, s});
    }
  }
  return cells;
}

std::string grid_csv(const std::vector<CellResult>& results, const std::vector<std::uint64_t>& seeds,
                     const ExperimentConfig& base) {
  struct Row {
    Method method;
    FeatureKind kind;
    std::vector<std::optional<EvalResult>> per_seed;
    std::string error;
  };
  std::vector<Row> rows;
  for (const CellResult& r : results) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& row) {
      return row.method == r.cell.method && (r.cell.method == Method::None || row.kind == r.cell.kind);
    });
    if (it == rows.end()) {
      rows.push_back({r.cell.method, r.cell.kind, std::vector<std::optional<EvalResult>>(seeds.size()), {}});
      it = rows.end() - 1;
    }
    const auto si = static_cast<std::size_t>(std::find(seeds.begin(), seeds.end(), r.cell.seed) - seeds.begin());
    if (r.record) {
      it->per_seed[si] = r.record->test;
    } else if (it->error.empty()) {
      it->error = r.error;
    }
  }

  // Median per row and metric; NaN marks rows with no successful seed.
  const auto row_median = [](const Row& row, ValMetric m) {
    std::vector<double> v;
    for (const auto& e : row.per_seed) {
      if (e) v.push_back(e->get(m));
    }
    return v.empty() ? std::nan("") : median(v);
  };
  const auto best_row = [&](ValMetric m) {
    std::size_t best = rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double v = row_median(rows[i], m);
      if (std::isnan(v)) continue;
      if (best == rows.size() || v > row_median(rows[best], m)) best = i;
    }
    return best;
  };
  const std::size_t best_pr = best_row(ValMetric::PrAuc);
  const std::size_t best_f1 = best_row(ValMetric::F1);

  std::ostringstream os;
  os << "# method x feature grid, test metrics of the validation-selected epoch\n";
  config_comments(os, base);
  os << "method,features";
  for (const char* metric : {"pr_auc", "f1"}) {
    for (std::uint64_t s : seeds) os << ',' << metric << "_seed" << s;
    os << ',' << metric << "_median," << metric << "_max";
  }
  os << ",status\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    os << to_string(row.method) << ',' << (row.method == Method::None ? "-" : std::string(to_string(row.kind)));
    for (ValMetric m : {ValMetric::PrAuc, ValMetric::F1}) {
      for (const auto& e : row.per_seed) os << ',' << (e ? fixed(e->get(m)) : "");
      const double med = row_median(row, m);
      os << ',' << (std::isnan(med) ? "" : fixed(med));
      os << ',' << ((m == ValMetric::PrAuc ? best_pr : best_f1) == i ? 1 : 0);
    }
    std::string status = row.error.empty() ? "ok" : "error: " + row.error;
    std::replace(status.begin(), status.end(), ',', ';');
    os << ',' << status << '\n';
  }
  return os.str();
}

std::vector<Cell> ablation_cells(const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds) {
  std::vector<Cell> cells;
  for (double f : fractions) {
    for (Method m : {Method::None, Method::ConReg}) {
      for (std::uint64_t s : seeds) cells.push_back({m, FeatureKind::Combined, f, s});
    }
  }
  return cells;
}

std::string ablation_runs_csv(const std::vector<CellResult>& results, const ExperimentConfig& base) {
  std::ostringstream os;
  os << "# training-fraction ablation, one row per run\n";
  config_comments(os, base);
  os << "fraction,method,features,seed,train_examples,test_pr_auc,test_f1,status\n";
  for (const CellResult& r : results) {
    os << fixed(r.cell.train_fraction) << ',' << to_string(r.cell.method) << ','
       << (r.cell.method == Method::None ? "-" : std::string(to_string(r.cell.kind))) << ',' << r.cell.seed << ',';
    if (r.record) {
      os << r.record->train_examples << ',' << fixed(r.record->test.pr_auc) << ',' << fixed(r.record->test.f1)
         << ",ok\n";
    } else {
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      os << ",,,error: " << err << '\n';
    }
  }
  return os.str();
}

std::string ablation_plot_csv(const std::vector<CellResult>& results, ValMetric metric) {
  std::map<std::pair<double, int>, std::vector<double>> series;
  for (const CellResult& r : results) {
    if (r.record) series[{r.cell.train_fraction, static_cast<int>(r.cell.method)}].push_back(r.record->test.get(metric));
  }
  std::ostringstream os;
  os << "# test " << to_string(metric) << " by training fraction\n";
  os << "fraction,method,median,min,max\n";
  for (const auto& [key, values] : series) {
    os << fixed(key.first) << ',' << to_string(static_cast<Method>(key.second)) << ',' << fixed(median(values)) << ','
       << fixed(*std::min_element(values.begin(), values.end())) << ','
       << fixed(*std::max_element(values.begin(), values.end())) << '\n';
  }
  return os.str();
}

std::string params_table(const ModelSpec& spec, const ExtractorCosts& costs) {
  std::ostringstream os;
  os << "# training and inference parameter counts; inference adds the extractor for methods that need it\n";
  os << "# spec=" << spec_json(spec).dump() << '\n';
  os << "# extractor a=" << costs.a << " b=" << costs.b << " combined=" << costs.combined << '\n';
  os << "method,train_a,train_b,train_combined,inference_a,inference_b,inference_combined\n";
  const FeatureKind kinds[] = {FeatureKind::A, FeatureKind::B, FeatureKind::Combined};
  for (Method m : kAllMethods) {
    os << to_string(m);
    for (Phase p : {Phase::Training, Phase::Inference}) {
      for (FeatureKind k : kinds) os << ',' << count_params(spec, m, k, p, costs);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace embreg
