#include "embreg/trainer.hpp"

#include "embreg/metrics.hpp"
#include "embreg/regularizers.hpp"
#include "embreg/resample.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace embreg {

std::string_view to_string(ValMetric m) { return m == ValMetric::PrAuc ? "pr-auc" : "f1"; }

ValMetric parse_val_metric(std::string_view text) {
  if (text == "pr-auc") return ValMetric::PrAuc;
  if (text == "f1") return ValMetric::F1;
  throw ArgumentError("unknown metric '" + std::string(text) + "'");
}

void ExperimentConfig::validate() const {
  if (method == Method::DisReg && batch_size < 2) throw ConfigError("dis-reg needs batch size >= 2 to form pairs");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train fraction must lie in (0, 1]");
  if (patience < 1) throw ConfigError("patience must be positive");
  const double a = effective_alpha();
  if (!std::isfinite(a) || a < 0.0) throw ConfigError("alpha must be finite and non-negative");
}

void Adam::step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size()) throw ArgumentError("adam: gradient count does not match parameters");
  if (m_.empty()) {
    for (const NamedTensor& p : params) {
      m_.push_back(Tensor::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Tensor::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].array();
    m_[i].array() = config_.beta1 * m_[i].array() + (1.0 - config_.beta1) * g;
    v_[i].array() = config_.beta2 * v_[i].array() + (1.0 - config_.beta2) * g * g;
    params[i].value.array() -= config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

Dataset subset_train(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("train fraction must lie in (0, 1]");
  const std::size_t n = data.train.size();
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (keep == 0) throw ConfigError("train fraction " + std::to_string(fraction) + " leaves no training examples");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng(seed).split("subset").shuffle(idx);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());

  Dataset out;
  out.input_period_s = data.input_period_s;
  out.input_bins = data.input_bins;
  out.num_classes = data.num_classes;
  out.val = data.val;
  out.test = data.test;
  out.train.reserve(keep);
  for (std::size_t i : idx) out.train.push_back(data.train[i]);
  return out;
}

namespace {

/// Stacked tensors for a group of examples.
struct Batch {
  Tensor x;       // (B * T_pad) x bins
  Tensor v;       // (B * T_E) x B_F, empty when the method ignores features
  Tensor labels;  // B x C
  Index count = 0;
  Index embed_frames = 0;
};

struct Geometry {
  Index padded_frames;
  Index embed_frames;
  double embed_period;
};

Geometry geometry_for(const ModelSpec& spec, Index input_frames, double input_period) {
  const Index pool = spec.total_pool();
  const Index padded = (input_frames + pool - 1) / pool * pool;
  return {padded, padded / pool, spec.embedding_period(input_period)};
}

Batch make_batch(const ModelParams& params, const std::vector<const Example*>& examples, const Geometry& geo,
                 double input_period) {
  const Method method = params.method();
  Batch b;
  b.count = static_cast<Index>(examples.size());
  b.embed_frames = geo.embed_frames;
  const Index bins = examples.front()->input.cols();
  const Index C = examples.front()->labels.cols();
  b.labels.resize(b.count, C);
  if (method != Method::FeatureOnly) b.x.resize(b.count * geo.padded_frames, bins);
  if (uses_features(method)) b.v.resize(b.count * geo.embed_frames, params.feature_dims());
  (void)input_period;
  for (Index i = 0; i < b.count; ++i) {
    const Example& e = *examples[static_cast<std::size_t>(i)];
    b.labels.row(i) = e.labels.row(0);
    if (method != Method::FeatureOnly) {
      if (e.input.rows() == geo.padded_frames) {
        b.x.middleRows(i * geo.padded_frames, geo.padded_frames) = e.input;
      } else {
        b.x.middleRows(i * geo.padded_frames, geo.padded_frames) = fit_frames(e.input, geo.padded_frames);
      }
    }
    if (uses_features(method)) {
      b.v.middleRows(i * geo.embed_frames, geo.embed_frames) =
          aligned_features(e, params.feature_kind(), geo.embed_frames, geo.embed_period);
    }
  }
  return b;
}

Index common_frames(const Dataset& data) {
  Index frames = -1;
  for (const auto* split : {&data.train, &data.val, &data.test}) {
    for (const Example& e : *split) {
      if (frames < 0) frames = e.input.rows();
      if (e.input.rows() != frames) throw ConfigError("examples differ in input frame count");
    }
  }
  if (frames < 1) throw ConfigError("dataset is empty");
  return frames;
}

std::string describe(double task, double reg, double final_loss) {
  std::ostringstream os;
  os << "task=" << task << " reg=" << reg << " final=" << final_loss;
  return os.str();
}

}  // namespace

EvalResult evaluate(const ModelParams& params, const std::vector<Example>& examples, double input_period_s) {
  if (examples.empty()) throw ConfigError("evaluate: no examples");
  const Geometry geo = geometry_for(params.spec(), examples.front().input.rows(), input_period_s);
  const Index C = params.spec().num_classes;
  const Index N = static_cast<Index>(examples.size());
  Tensor scores(N, C), labels(N, C);
  constexpr Index kEvalBatch = 64;
  for (Index start = 0; start < N; start += kEvalBatch) {
    const Index count = std::min(kEvalBatch, N - start);
    std::vector<const Example*> group;
    for (Index i = 0; i < count; ++i) group.push_back(&examples[static_cast<std::size_t>(start + i)]);
    const Batch b = make_batch(params, group, geo, input_period_s);
    Graph g;
    BoundModel m(g, params, false);
    Var x = b.x.size() ? g.constant(b.x) : Var{};
    Var v = b.v.size() ? g.constant(b.v) : Var{};
    Var pred = predict(m, x, v, b.embed_frames);
    scores.middleRows(start, count) = pred.value();
    labels.middleRows(start, count) = b.labels;
  }
  EvalResult r;
  r.pr_auc = macro_pr_auc(scores, labels);
  r.f1 = instance_f1(scores, labels);
  return r;
}

TrainReport train(const ExperimentConfig& config, const Dataset& full, const ModelSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  spec.validate();
  if (spec.input_bins != full.input_bins || spec.num_classes != full.num_classes) {
    throw ConfigError("model spec does not match the corpus (bins/classes)");
  }
  const Index input_frames = common_frames(full);
  const Dataset data = config.train_fraction < 1.0 ? subset_train(full, config.train_fraction, config.seed) : full;
  if (data.train.empty() || data.val.empty() || data.test.empty()) throw ConfigError("every split needs examples");

  const Rng root(config.seed);
  ModelParams params = ModelParams::init(spec, config.method, config.feature_kind, root.split("init"));
  const Geometry geo = geometry_for(spec, input_frames, data.input_period_s);
  const double alpha = config.effective_alpha();
  Adam adam({config.lr, 0.9, 0.999, 1e-8});

  TrainReport report;
  report.config = config;
  report.spec = spec;
  report.train_examples = data.train.size();
  report.training_params = count_params(params, Phase::Training);
  report.inference_params = count_params(params, Phase::Inference);

  const std::size_t n = data.train.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::optional<ModelParams> best;
  Index step = 0;

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    root.split("shuffle").split(static_cast<std::uint64_t>(epoch)).shuffle(order);

    // Batch boundaries; a lone trailing example joins the previous batch.
    std::vector<std::size_t> bounds;
    for (std::size_t s = 0; s < n; s += batch) bounds.push_back(s);
    if (bounds.size() > 1 && n - bounds.back() == 1) bounds.pop_back();
    bounds.push_back(n);

    double epoch_loss = 0.0;
    for (std::size_t bi = 0; bi + 1 < bounds.size(); ++bi) {
      std::vector<const Example*> group;
      for (std::size_t k = bounds[bi]; k < bounds[bi + 1]; ++k) group.push_back(&data.train[order[k]]);
      const Batch b = make_batch(params, group, geo, data.input_period_s);

      Graph g;
      BoundModel m(g, params, true);
      Var x = b.x.size() ? g.constant(b.x) : Var{};
      Var v = b.v.size() ? g.constant(b.v) : Var{};
      Var l;
      Var pred = predict(m, x, v, b.embed_frames, &l);
      Var task = bce_loss(pred, b.labels);

      std::optional<Var> reg;
      if (config.method == Method::ConReg) {
        reg = con_reg_loss(l, v, m.head());
      } else if (config.method == Method::DisReg) {
        std::vector<Var> ls;
        std::vector<Tensor> vs;
        for (Index i = 0; i < b.count; ++i) {
          ls.push_back(slice_rows(l, i * b.embed_frames, b.embed_frames));
          vs.push_back(b.v.middleRows(i * b.embed_frames, b.embed_frames));
        }
        reg = dis_reg_loss(ls, vs);
      }
      Var final_loss = compose_loss(task, reg, alpha);

      const StepRecord rec{epoch, step, task.scalar(), reg ? reg->scalar() : 0.0, final_loss.scalar()};
      if (!std::isfinite(rec.final_loss) || !std::isfinite(rec.task_loss) || !std::isfinite(rec.reg_loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) +
                             ": " + describe(rec.task_loss, rec.reg_loss, rec.final_loss));
      }
      report.steps.push_back(rec);
      epoch_loss += rec.final_loss;

      g.backward(final_loss);
      std::vector<Tensor> grads;
      grads.reserve(m.vars().size());
      for (std::size_t i = 0; i < m.vars().size(); ++i) {
        const Tensor& gr = m.vars()[i].grad();
        const Tensor& pv = params.tensors()[i].value;
        grads.push_back(gr.size() ? gr : Tensor::Zero(pv.rows(), pv.cols()));
      }
      adam.step(params.tensors(), grads);
      ++step;
    }

    const double val = evaluate(params, data.val, data.input_period_s).get(config.metric);
    report.epochs.push_back({epoch, epoch_loss / static_cast<double>(bounds.size() - 1), val});
    if (!best || val > report.best_val_metric) {
      report.best_val_metric = val;
      report.best_epoch = epoch;
      best = params;
    }
    if (epoch - report.best_epoch >= config.patience) break;
  }

  report.val = evaluate(*best, data.val, data.input_period_s);
  report.test = evaluate(*best, data.test, data.input_period_s);
  report.best_params = std::move(best);
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

nlohmann::json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["method"] = to_string(c.method);
  j["features"] = to_string(c.feature_kind);
  j["alpha"] = c.effective_alpha();
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["train_fraction"] = c.train_fraction;
  j["seed"] = c.seed;
  j["patience"] = c.patience;
  j["metric"] = to_string(c.metric);
  return j;
}

std::string report_jsonl(const TrainReport& r, bool include_wall_time) {
  std::ostringstream os;
  for (const StepRecord& s : r.steps) {
    nlohmann::ordered_json j;
    j["type"] = "step";
    j["epoch"] = s.epoch;
    j["step"] = s.step;
    j["task_loss"] = s.task_loss;
    j["reg_loss"] = s.reg_loss;
    j["final_loss"] = s.final_loss;
    os << j.dump() << '\n';
  }
  for (const EpochRecord& e : r.epochs) {
    nlohmann::ordered_json j;
    j["type"] = "epoch";
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_metric"] = e.val_metric;
    os << j.dump() << '\n';
  }
  nlohmann::ordered_json j;
  j["type"] = "summary";
  j["config"] = config_json(r.config);
  j["train_examples"] = r.train_examples;
  j["best_epoch"] = r.best_epoch;
  j["best_val_metric"] = r.best_val_metric;
  j["val"] = {{"pr_auc", r.val.pr_auc}, {"f1", r.val.f1}};
  j["test"] = {{"pr_auc", r.test.pr_auc}, {"f1", r.test.f1}};
  j["training_params"] = r.training_params;
  j["inference_params"] = r.inference_params;
  if (include_wall_time) j["wall_time_s"] = r.wall_time_s;
  os << j.dump() << '\n';
  return os.str();
}

}  // namespace embreg
