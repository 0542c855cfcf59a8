#include "embreg/synth.hpp"

#include "embreg/regularizers.hpp"
#include "embreg/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace embreg {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (num_classes < 1) throw ConfigError("synth: need at least one class");
  if (num_examples < 10) throw ConfigError("synth: need at least 10 examples for an 8:1:1 split");
  if (!(label_density > 0.0 && label_density < 1.0)) throw ConfigError("synth: label density must lie in (0, 1)");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("synth: rho must lie in [0, 1]");
  if (noise_x < 0.0 || noise_v < 0.0 || interference < 0.0) throw ConfigError("synth: noise levels must be >= 0");
  if (input_bins < 1) throw ConfigError("synth: need at least one input bin");
  if (!(input_period_s > 0.0) || !(clip_seconds >= 1.0)) {
    throw ConfigError("synth: clips must last at least one second on a positive frame period");
  }
}

Index SynthSpec::frames_at(double period_s) const {
  return std::max<Index>(1, static_cast<Index>(std::llround(clip_seconds / period_s)));
}

Index SynthSpec::input_frames() const { return frames_at(input_period_s); }

namespace {

constexpr double kMinPrototypeDistance = 0.1;

void round_to_f32(Tensor& t) {
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(t.data()[i]);
}

/// Rows are class directions supported on `support`; any row closer than the
/// minimum cosine distance to an earlier row is redrawn.
Tensor draw_prototypes(Index count, Index dims, const std::vector<Index>& support, Rng rng) {
  Tensor p = Tensor::Zero(count, dims);
  for (Index c = 0; c < count; ++c) {
    for (int attempt = 0;; ++attempt) {
      p.row(c).setZero();
      for (Index d : support) p(c, d) = rng.normal();
      bool ok = p.row(c).norm() > 0.0;
      for (Index o = 0; ok && o < c; ++o) ok = frame_cosine_distance(p.row(c), p.row(o)) > kMinPrototypeDistance;
      if (ok) break;
      if (attempt > 1000) throw ConfigError("synth: cannot draw non-collinear prototypes; raise rho");
    }
  }
  return p;
}

std::vector<Index> draw_support(Index dims, double rho, Rng rng) {
  std::vector<Index> all(static_cast<std::size_t>(dims));
  std::iota(all.begin(), all.end(), Index{0});
  rng.shuffle(all);
  const auto keep = static_cast<std::size_t>(std::max<long long>(1, std::llround(rho * static_cast<double>(dims))));
  all.resize(keep);
  std::sort(all.begin(), all.end());
  return all;
}

/// 0/1 activity over `frames`: one contiguous window covering 50-100% of the clip.
Eigen::VectorXd draw_window(Index frames, Rng& rng) {
  const Index min_len = std::max<Index>(1, frames / 2);
  const Index len = min_len + static_cast<Index>(rng.below(static_cast<std::uint64_t>(frames - min_len + 1)));
  const Index start = static_cast<Index>(rng.below(static_cast<std::uint64_t>(frames - len + 1)));
  Eigen::VectorXd a = Eigen::VectorXd::Zero(frames);
  a.segment(start, len).setOnes();
  return a;
}

/// Activity on a coarser or finer grid: the mean of the input frames each
/// output frame covers.
Eigen::VectorXd resample_activity(const Eigen::VectorXd& act, double in_period, Index out_frames,
                                  double out_period) {
  Eigen::VectorXd out(out_frames);
  const Index n_in = act.size();
  for (Index k = 0; k < out_frames; ++k) {
    Index lo = static_cast<Index>(std::floor(k * out_period / in_period + 1e-9));
    Index hi = static_cast<Index>(std::ceil((k + 1) * out_period / in_period - 1e-9));
    lo = std::clamp<Index>(lo, 0, n_in - 1);
    hi = std::clamp<Index>(hi, lo + 1, n_in);
    out(k) = act.segment(lo, hi - lo).mean();
  }
  return out;
}

}  // namespace

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  const Index C = spec.num_classes;
  const Index T = spec.input_frames();
  const FeatureLayout la = layout(FeatureKind::A);
  const FeatureLayout lb = layout(FeatureKind::B);
  const Index Ta = spec.frames_at(la.frame_period_s);
  const Index Tb = spec.frames_at(lb.frame_period_s);

  std::vector<Index> input_support(static_cast<std::size_t>(spec.input_bins));
  std::iota(input_support.begin(), input_support.end(), Index{0});
  const Tensor proto_x = draw_prototypes(C, spec.input_bins, input_support, root.split("proto.input"));
  const Tensor interferers = draw_prototypes(C, spec.input_bins, input_support, root.split("proto.interference"));
  // A and B see the classes through different dimension subsets.
  Tensor proto_a = draw_prototypes(C, la.dims, draw_support(la.dims, spec.rho, root.split("support.a")),
                                   root.split("proto.a"));
  Tensor proto_b = draw_prototypes(C, lb.dims, draw_support(lb.dims, spec.rho, root.split("support.b")),
                                   root.split("proto.b"));
  // Each class is carried at full strength by one stream and weakened in the
  // other, so only the combination sees every class clearly.
  Rng salience = root.split("salience");
  for (Index c = 0; c < C; ++c) {
    const bool a_strong = salience.bernoulli(0.5);
    const double weak = salience.uniform(0.05, 0.5);
    proto_a.row(c) *= a_strong ? 1.0 : weak;
    proto_b.row(c) *= a_strong ? weak : 1.0;
  }

  std::vector<Example> all;
  all.reserve(static_cast<std::size_t>(spec.num_examples));
  const Rng example_root = root.split("example");
  for (Index i = 0; i < spec.num_examples; ++i) {
    Rng rng = example_root.split(static_cast<std::uint64_t>(i));
    Tensor labels = Tensor::Zero(1, C);
    Tensor activity = Tensor::Zero(T, C);  // frames x classes
    for (Index c = 0; c < C; ++c) {
      if (!rng.bernoulli(spec.label_density)) continue;
      labels(0, c) = 1.0;
      activity.col(c) = draw_window(T, rng);
    }

    Tensor x = activity * proto_x;
    for (Index k = 0; k < interferers.rows(); ++k) {
      if (!rng.bernoulli(0.5)) continue;
      const double amp = spec.interference * rng.uniform(0.5, 1.5);
      const Eigen::VectorXd w = draw_window(T, rng);
      x += amp * w * interferers.row(k);
    }
    for (Index j = 0; j < x.size(); ++j) x.data()[j] += spec.noise_x * rng.normal();

    Tensor act_a(Ta, C), act_b(Tb, C);
    for (Index c = 0; c < C; ++c) {
      act_a.col(c) = resample_activity(activity.col(c), spec.input_period_s, Ta, la.frame_period_s);
      act_b.col(c) = resample_activity(activity.col(c), spec.input_period_s, Tb, lb.frame_period_s);
    }
    Tensor va = act_a * proto_a;
    Tensor vb = act_b * proto_b;
    for (Index j = 0; j < va.size(); ++j) va.data()[j] += spec.noise_v * rng.normal();
    for (Index j = 0; j < vb.size(); ++j) vb.data()[j] += spec.noise_v * rng.normal();

    round_to_f32(x);
    round_to_f32(va);
    round_to_f32(vb);
    char id[32];
    std::snprintf(id, sizeof id, "ex%05lld", static_cast<long long>(i));
    all.push_back(Example{id, std::move(x), std::move(labels), FeatureStream(std::move(va), la.frame_period_s, "a"),
                          FeatureStream(std::move(vb), lb.frame_period_s, "b")});
  }

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng = root.split("split");
  split_rng.shuffle(order);
  const auto n = order.size();
  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train),
            order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());

  Dataset data;
  data.input_period_s = spec.input_period_s;
  data.input_bins = spec.input_bins;
  data.num_classes = C;
  for (std::size_t k = 0; k < n; ++k) {
    auto& dest = k < n_train ? data.train : (k < n_train + n_val ? data.val : data.test);
    dest.push_back(std::move(all[order[k]]));
  }
  return data;
}

namespace {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

}  // namespace

fs::path export_corpus(const Dataset& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "examples", ec);
  if (ec) throw LoadError("cannot create " + (dir / "examples").string() + ": " + ec.message());
  const fs::path manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw LoadError("cannot write " + manifest.string());

  const double clip = data.train.empty() ? 1.0 : data.train.front().a.duration_s();
  const auto write_split = [&](const std::vector<Example>& examples, Split split) {
    for (const Example& e : examples) {
      const std::string stem = "examples/" + e.id;
      nlohmann::ordered_json rec;
      rec["id"] = e.id;
      rec["split"] = split_name(split);
      rec["input"] = stem + ".input.fstr";
      rec["labels"] = stem + ".labels.fstr";
      rec["a"] = stem + ".a.fstr";
      rec["b"] = stem + ".b.fstr";
      write_stream(FeatureStream(e.input, data.input_period_s, "input"), dir / rec["input"].get<std::string>());
      write_stream(FeatureStream(e.labels, clip, "labels"), dir / rec["labels"].get<std::string>());
      write_stream(e.a, dir / rec["a"].get<std::string>());
      write_stream(e.b, dir / rec["b"].get<std::string>());
      out << rec.dump() << '\n';
    }
  };
  write_split(data.train, Split::Train);
  write_split(data.val, Split::Val);
  write_split(data.test, Split::Test);
  if (!out) throw LoadError("write failed for " + manifest.string());
  return manifest;
}

Dataset load_corpus(const fs::path& where) {
  const fs::path manifest = fs::is_directory(where) ? where / "manifest.jsonl" : where;
  const fs::path dir = manifest.parent_path();
  std::ifstream in(manifest);
  if (!in) throw LoadError("cannot open manifest " + manifest.string());

  Dataset data;
  bool first = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    std::string id, split;
    try {
      rec = nlohmann::json::parse(line);
      id = rec.at("id").get<std::string>();
      split = rec.at("split").get<std::string>();
      for (const char* key : {"input", "labels", "a", "b"}) rec.at(key).get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(manifest.string() + ":" + std::to_string(line_no) + ": bad record: " + e.what());
    }
    const auto load = [&](const char* key) {
      const fs::path p = dir / rec.at(key).get<std::string>();
      if (!fs::exists(p)) throw LoadError("example " + id + ": missing " + key + " file " + p.string());
      return read_stream(p);
    };
    FeatureStream input = load("input");
    FeatureStream labels = load("labels");
    FeatureStream a = load("a");
    FeatureStream b = load("b");
    if (first) {
      data.input_period_s = input.frame_period_s();
      data.input_bins = input.dims();
      data.num_classes = labels.dims();
      first = false;
    } else if (input.dims() != data.input_bins || labels.dims() != data.num_classes) {
      throw LoadError("example " + id + ": shape differs from the rest of the corpus");
    }
    Example e{id, input.matrix(), labels.matrix(), std::move(a), std::move(b)};
    if (split == "train") {
      data.train.push_back(std::move(e));
    } else if (split == "val") {
      data.val.push_back(std::move(e));
    } else if (split == "test") {
      data.test.push_back(std::move(e));
    } else {
      throw LoadError("example " + id + ": unknown split '" + split + "'");
    }
  }
  if (first) throw LoadError("manifest " + manifest.string() + " lists no examples");
  return data;
}

}  // namespace embreg
