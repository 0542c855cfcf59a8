// embreg: corpus generation, training runs, method grids, training-fraction
// ablations and parameter audits.

#include "embreg/experiments.hpp"
#include "embreg/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace embreg;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kNumerical = 4 };

struct TrainFlags {
  std::string method = "none";
  std::string features;
  std::optional<double> alpha;
  double lr = ExperimentConfig{}.lr;
  Index batch_size = ExperimentConfig{}.batch_size;
  Index epochs = ExperimentConfig{}.epochs;
  Index patience = ExperimentConfig{}.patience;
  double train_fraction = 1.0;
  std::uint64_t seed = 1;
  std::string metric = "pr-auc";
};

void add_model_flags(CLI::App* app, ModelSpec& spec) {
  app->add_option("--embed-dim", spec.embed_dim, "Embedding width B_E")->capture_default_str();
  app->add_option("--blocks", spec.num_blocks, "Residual blocks in the encoder")->capture_default_str();
  app->add_option("--hidden", spec.decoder_hidden, "Decoder hidden width")->capture_default_str();
  app->add_option("--pool", spec.pool_factor_per_block, "Time pooling factor per block")->capture_default_str();
}

void add_optimizer_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--alpha", f.alpha, "Regularization weight (default 5 for con-reg, 1 for dis-reg)");
  app->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--batch-size", f.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--epochs", f.epochs, "Maximum epochs")->capture_default_str();
  app->add_option("--patience", f.patience, "Early-stopping patience in epochs")->capture_default_str();
  app->add_option("--metric", f.metric, "Validation metric for model selection")
      ->check(CLI::IsMember({"pr-auc", "f1"}))
      ->capture_default_str();
}

ExperimentConfig to_config(const TrainFlags& f) {
  ExperimentConfig c;
  c.method = parse_method(f.method);
  if (!f.features.empty()) c.feature_kind = parse_feature_kind(f.features);
  c.alpha = f.alpha;
  c.lr = f.lr;
  c.batch_size = f.batch_size;
  c.epochs = f.epochs;
  c.patience = f.patience;
  c.train_fraction = f.train_fraction;
  c.seed = f.seed;
  c.metric = parse_val_metric(f.metric);
  return c;
}

ModelSpec spec_for(ModelSpec spec, const Dataset& data) {
  spec.input_bins = data.input_bins;
  spec.num_classes = data.num_classes;
  return spec;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
  if (!out) throw LoadError("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw LoadError("cannot create " + dir.string() + ": " + ec.message());
}

int report_cells(const std::vector<CellResult>& results) {
  std::size_t failed = 0;
  for (const CellResult& r : results) {
    if (!r.record) {
      ++failed;
      std::cerr << "cell " << to_string(r.cell.method) << '/' << to_string(r.cell.kind) << " seed " << r.cell.seed
                << " failed: " << r.error << '\n';
    }
  }
  return failed == results.size() && !results.empty() ? kFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-informed embedding regularization experiments"};
  app.require_subcommand(1);

  // synth
  SynthSpec synth;
  std::string synth_out;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic tagging corpus");
  cmd_synth->add_option("--n", synth.num_examples, "Number of clips")->capture_default_str();
  cmd_synth->add_option("--classes", synth.num_classes, "Number of tags")->capture_default_str();
  cmd_synth->add_option("--clip-seconds", synth.clip_seconds, "Clip duration")->capture_default_str();
  cmd_synth->add_option("--bins", synth.input_bins, "Input bins per frame")->capture_default_str();
  cmd_synth->add_option("--seed", synth.seed, "Corpus seed")->capture_default_str();
  cmd_synth->add_option("--noise-x", synth.noise_x, "Input noise sigma")->capture_default_str();
  cmd_synth->add_option("--noise-v", synth.noise_v, "Feature noise sigma")->capture_default_str();
  cmd_synth->add_option("--rho", synth.rho, "Share of informative feature dims")->capture_default_str();
  cmd_synth->add_option("--density", synth.label_density, "Per-tag label probability")->capture_default_str();
  cmd_synth->add_option("--interference", synth.interference, "Amplitude of label-free input sources")
      ->capture_default_str();
  cmd_synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  TrainFlags train_flags;
  ModelSpec model;
  std::string corpus, train_out;
  bool timing = false;
  auto* cmd_train = app.add_subcommand("train", "Train one configuration");
  cmd_train->add_option("--corpus", corpus, "Corpus directory or manifest")->required();
  cmd_train->add_option("--method", train_flags.method, "Feature usage")
      ->check(CLI::IsMember({"none", "feature-only", "concat", "film", "con-reg", "dis-reg"}))
      ->capture_default_str();
  cmd_train->add_option("--features", train_flags.features, "Feature stream: a, b or combined (default combined)")
      ->check(CLI::IsMember({"a", "b", "combined"}));
  cmd_train->add_option("--train-fraction", train_flags.train_fraction, "Share of training clips to keep")
      ->capture_default_str();
  cmd_train->add_option("--seed", train_flags.seed, "Run seed")->capture_default_str();
  cmd_train->add_option("--out", train_out, "Output directory")->required();
  cmd_train->add_flag("--timing", timing, "Include wall time in the run record");
  add_optimizer_flags(cmd_train, train_flags);
  add_model_flags(cmd_train, model);

  // grid
  TrainFlags grid_flags;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string grid_corpus, grid_out;
  unsigned threads = 0;
  auto* cmd_grid = app.add_subcommand("grid", "Every method on every feature stream, several seeds");
  cmd_grid->add_option("--corpus", grid_corpus, "Corpus directory or manifest")->required();
  cmd_grid->add_option("--seeds", seeds, "Run seeds")->delimiter(',')->capture_default_str();
  cmd_grid->add_option("--out", grid_out, "Output directory")->required();
  cmd_grid->add_option("--threads", threads, "Concurrent cells (default EMBREG_THREADS or all cores)");
  add_optimizer_flags(cmd_grid, grid_flags);
  add_model_flags(cmd_grid, model);

  // ablate
  TrainFlags ablate_flags;
  std::vector<double> fractions = kAblationFractions;
  std::string ablate_corpus, ablate_out;
  auto* cmd_ablate = app.add_subcommand("ablate", "None vs con-reg(combined) across training fractions");
  cmd_ablate->add_option("--corpus", ablate_corpus, "Corpus directory or manifest")->required();
  cmd_ablate->add_option("--fractions", fractions, "Training fractions")->delimiter(',')->capture_default_str();
  cmd_ablate->add_option("--seeds", seeds, "Run seeds")->delimiter(',')->capture_default_str();
  cmd_ablate->add_option("--out", ablate_out, "Output directory")->required();
  cmd_ablate->add_option("--threads", threads, "Concurrent cells (default EMBREG_THREADS or all cores)");
  add_optimizer_flags(cmd_ablate, ablate_flags);
  add_model_flags(cmd_ablate, model);

  // params
  ModelSpec audit;
  std::string params_out;
  auto* cmd_params = app.add_subcommand("params", "Training and inference parameter counts per method");
  cmd_params->add_option("--bins", audit.input_bins, "Input bins per frame")->capture_default_str();
  cmd_params->add_option("--classes", audit.num_classes, "Number of tags")->capture_default_str();
  cmd_params->add_option("--out", params_out, "Also write the table to this file");
  add_model_flags(cmd_params, audit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*cmd_synth) {
      const Dataset data = generate(synth);
      const fs::path manifest = export_corpus(data, synth_out);
      std::cout << "wrote " << data.size() << " clips (" << data.train.size() << '/' << data.val.size() << '/'
                << data.test.size() << ") to " << manifest.string() << '\n';
      return kOk;
    }

    if (*cmd_train) {
      if (train_flags.method == "none" && !train_flags.features.empty()) {
        std::cerr << "note: --features is ignored for --method none\n";
        train_flags.features.clear();
      }
      const ExperimentConfig config = to_config(train_flags);
      config.validate();
      const Dataset data = load_corpus(corpus);
      ensure_dir(train_out);
      const TrainReport report = train(config, data, spec_for(model, data));
      const RunRecord record = make_record(report, timing);
      write_text(fs::path(train_out) / "run_record.json", to_json(record).dump(2) + "\n");
      write_text(fs::path(train_out) / "train_log.jsonl", report_jsonl(report, timing));
      save_checkpoint(*report.best_params, fs::path(train_out) / "model.embr", Phase::Inference);
      std::cout << to_string(config.method) << " test pr-auc " << record.test.pr_auc << " f1 " << record.test.f1
                << " (best epoch " << record.best_epoch << ")\n";
      std::cerr << "wall time " << report.wall_time_s << " s\n";
      return kOk;
    }

    if (*cmd_grid) {
      const ExperimentConfig base = to_config(grid_flags);
      base.validate();
      const Dataset data = load_corpus(grid_corpus);
      ensure_dir(fs::path(grid_out) / "cells");
      const auto results = run_cells(grid_cells(seeds), base, data, spec_for(model, data),
                                     threads ? threads : thread_cap(), fs::path(grid_out) / "cells");
      write_text(fs::path(grid_out) / "grid.csv", grid_csv(results, seeds, base));
      std::cout << "wrote " << (fs::path(grid_out) / "grid.csv").string() << '\n';
      return report_cells(results);
    }

    if (*cmd_ablate) {
      const ExperimentConfig base = to_config(ablate_flags);
      base.validate();
      for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in (0, 1]");
      }
      const Dataset data = load_corpus(ablate_corpus);
      ensure_dir(fs::path(ablate_out) / "cells");
      const auto results = run_cells(ablation_cells(fractions, seeds), base, data, spec_for(model, data),
                                     threads ? threads : thread_cap(), fs::path(ablate_out) / "cells");
      write_text(fs::path(ablate_out) / "ablation.csv", ablation_runs_csv(results, base));
      write_text(fs::path(ablate_out) / "ablation_plot.csv", ablation_plot_csv(results, base.metric));
      std::cout << "wrote " << (fs::path(ablate_out) / "ablation_plot.csv").string() << '\n';
      return report_cells(results);
    }

    if (*cmd_params) {
      const std::string table = params_table(audit);
      std::cout << table;
      if (!params_out.empty()) write_text(params_out, table);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
