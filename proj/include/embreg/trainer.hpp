#pragma once

#include "embreg/dataset.hpp"
#include "embreg/method.hpp"
#include "embreg/model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace embreg {

enum class ValMetric { PrAuc, F1 };

std::string_view to_string(ValMetric m);
ValMetric parse_val_metric(std::string_view text);

struct ExperimentConfig {
  Method method = Method::None;
  FeatureKind feature_kind = FeatureKind::Combined;
  /// Unset means the method's default (5 for Con-Reg, 1 for Dis-Reg).
  std::optional<double> alpha;
  double lr = 1e-3;
  Index batch_size = 8;
  Index epochs = 60;
  double train_fraction = 1.0;
  std::uint64_t seed = 1;
  Index patience = 10;
  ValMetric metric = ValMetric::PrAuc;

  double effective_alpha() const { return alpha.value_or(default_alpha(method)); }
  void validate() const;
};

/// Adam with bias correction.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  /// One update of every tensor in `params` from the matching entry of `grads`.
  void step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads);
  std::int64_t steps_taken() const { return t_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct StepRecord {
  Index epoch;
  Index step;
  double task_loss;
  double reg_loss;
  double final_loss;
};

struct EpochRecord {
  Index epoch;
  double train_loss;
  double val_metric;
};

struct EvalResult {
  double pr_auc = 0.0;
  double f1 = 0.0;
  double get(ValMetric m) const { return m == ValMetric::PrAuc ? pr_auc : f1; }
};

struct TrainReport {
  ExperimentConfig config;
  ModelSpec spec;
  std::size_t train_examples = 0;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  Index best_epoch = -1;
  double best_val_metric = 0.0;
  EvalResult val;
  EvalResult test;
  std::int64_t training_params = 0;
  std::int64_t inference_params = 0;
  double wall_time_s = 0.0;
  /// Parameters of the selected epoch, training-only tensors included.
  std::optional<ModelParams> best_params;
};

/// Keeps round(fraction * N) training examples, sampled without replacement and
/// returned in their original order. Validation and test are untouched.
Dataset subset_train(const Dataset& data, double fraction, std::uint64_t seed);

/// Scores and labels for a list of examples, features aligned as the method needs.
EvalResult evaluate(const ModelParams& params, const std::vector<Example>& examples, double input_period_s);

/// Mini-batch Adam on L + alpha * L_reg with validation-based model selection.
/// Deterministic given the config seed.
TrainReport train(const ExperimentConfig& config, const Dataset& data, const ModelSpec& spec);

/// Line-delimited JSON: one "step" record per optimizer step, one "epoch" record
/// per epoch, then a "summary" record. Wall time is included only on request so
/// that logs of equal-seed runs compare equal byte-for-byte.
std::string report_jsonl(const TrainReport& report, bool include_wall_time = false);
nlohmann::json config_json(const ExperimentConfig& config);

}  // namespace embreg
