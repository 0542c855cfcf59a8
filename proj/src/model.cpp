#include "embreg/model.hpp"

#include "embreg/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>

namespace embreg {

void ModelSpec::validate() const {
  if (input_bins < 1 || embed_dim < 1 || num_blocks < 1 || decoder_hidden < 1 || num_classes < 1 ||
      pool_factor_per_block < 1) {
    throw ConfigError("model spec: every dimension, block count and pool factor must be at least 1");
  }
}

Index ModelSpec::total_pool() const {
  Index p = 1;
  for (Index i = 0; i < num_blocks; ++i) p *= pool_factor_per_block;
  return p;
}

Index decoder_input_width(const ModelSpec& spec, Method method, Index feature_dims) {
  switch (method) {
    case Method::FeatureOnly:
      return feature_dims;
    case Method::Concat:
      return spec.embed_dim + feature_dims;
    default:
      return spec.embed_dim;
  }
}

std::vector<ParamShape> parameter_layout(const ModelSpec& spec, Method method, Index feature_dims) {
  spec.validate();
  if (uses_features(method) && feature_dims < 1) throw ConfigError("method needs a positive feature width");
  const Index E = spec.embed_dim;
  std::vector<ParamShape> out;
  const auto push = [&](std::string name, Index r, Index c, ParamRole role = ParamRole::Inference) {
    out.push_back({std::move(name), r, c, role});
  };
  if (method != Method::FeatureOnly) {
    push("frontend.w", spec.input_bins, E);
    push("frontend.b", 1, E);
    for (Index k = 0; k < spec.num_blocks; ++k) {
      const std::string p = "block" + std::to_string(k) + ".";
      push(p + "w1", E, E);
      push(p + "b1", 1, E);
      push(p + "w2", E, E);
      push(p + "b2", 1, E);
    }
  }
  if (method == Method::FiLM) {
    push("film.gamma.w", feature_dims, E);
    push("film.gamma.b", 1, E);
    push("film.beta.w", feature_dims, E);
    push("film.beta.b", 1, E);
  }
  push("decoder.w1", decoder_input_width(spec, method, feature_dims), spec.decoder_hidden);
  push("decoder.b1", 1, spec.decoder_hidden);
  push("decoder.w2", spec.decoder_hidden, spec.num_classes);
  push("decoder.b2", 1, spec.num_classes);
  if (method == Method::ConReg) {
    push("head.w", feature_dims, E, ParamRole::TrainingOnly);
    push("head.b", 1, E, ParamRole::TrainingOnly);
  }
  return out;
}

std::int64_t ExtractorCosts::of(FeatureKind kind) const {
  switch (kind) {
    case FeatureKind::A:
      return a;
    case FeatureKind::B:
      return b;
    case FeatureKind::Combined:
      return combined;
  }
  return 0;
}

ModelParams::ModelParams(ModelSpec spec, Method method, FeatureKind kind, Index feature_dims,
                         std::vector<NamedTensor> tensors)
    : spec_(spec), method_(method), kind_(kind), feature_dims_(feature_dims), tensors_(std::move(tensors)) {}

ModelParams ModelParams::init(const ModelSpec& spec, Method method, FeatureKind kind, Rng rng) {
  return init(spec, method, kind, layout(kind).dims, rng);
}

ModelParams ModelParams::init(const ModelSpec& spec, Method method, FeatureKind kind, Index feature_dims, Rng rng) {
  std::vector<NamedTensor> tensors;
  const Index E = spec.embed_dim;
  std::optional<ProjectionHead> head;
  std::optional<FiLMParams> film;
  if (method == Method::ConReg) head = ProjectionHead::init(feature_dims, E, rng.split("head"));
  if (method == Method::FiLM) film = FiLMParams::init(feature_dims, E, rng.split("film"));

  for (const ParamShape& s : parameter_layout(spec, method, feature_dims)) {
    Tensor t;
    if (s.name == "head.w") {
      t = head->weight;
    } else if (s.name == "head.b") {
      t = head->bias;
    } else if (s.name == "film.gamma.w") {
      t = film->gamma.weight;
    } else if (s.name == "film.gamma.b") {
      t = film->gamma.bias;
    } else if (s.name == "film.beta.w") {
      t = film->beta.weight;
    } else if (s.name == "film.beta.b") {
      t = film->beta.bias;
    } else if (s.rows == 1) {
      t = Tensor::Zero(1, s.cols);
    } else {
      Rng r = rng.split(s.name);
      const double limit = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      t.resize(s.rows, s.cols);
      for (Index i = 0; i < t.size(); ++i) t.data()[i] = r.uniform(-limit, limit);
    }
    tensors.push_back({s.name, std::move(t), s.role});
  }
  return ModelParams(spec, method, kind, feature_dims, std::move(tensors));
}

const Tensor* ModelParams::find(std::string_view name) const {
  for (const NamedTensor& t : tensors_) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

const Tensor& ModelParams::at(std::string_view name) const {
  const Tensor* t = find(name);
  if (!t) throw ArgumentError("model has no parameter '" + std::string(name) + "'");
  return *t;
}

bool ModelParams::has_training_only() const {
  return std::any_of(tensors_.begin(), tensors_.end(), [](const NamedTensor& t) {
    return t.role == ParamRole::TrainingOnly;
  });
}

std::int64_t ModelParams::count(ParamRole role) const {
  std::int64_t n = 0;
  for (const NamedTensor& t : tensors_) {
    if (t.role == role) n += t.value.size();
  }
  return n;
}

ModelParams ModelParams::inference_only() const {
  std::vector<NamedTensor> kept;
  for (const NamedTensor& t : tensors_) {
    if (t.role == ParamRole::Inference) kept.push_back(t);
  }
  return ModelParams(spec_, method_, kind_, feature_dims_, std::move(kept));
}

std::int64_t count_params(const ModelParams& params, Phase phase, const ExtractorCosts& costs) {
  const std::int64_t inference = params.count(ParamRole::Inference);
  if (phase == Phase::Training) return inference + params.count(ParamRole::TrainingOnly);
  return inference + (needs_features_at_inference(params.method()) ? costs.of(params.feature_kind()) : 0);
}

std::int64_t count_params(const ModelSpec& spec, Method method, FeatureKind kind, Phase phase,
                          const ExtractorCosts& costs) {
  std::int64_t inference = 0;
  std::int64_t training_only = 0;
  for (const ParamShape& s : parameter_layout(spec, method, layout(kind).dims)) {
    (s.role == ParamRole::Inference ? inference : training_only) += s.rows * s.cols;
  }
  if (phase == Phase::Training) return inference + training_only;
  return inference + (needs_features_at_inference(method) ? costs.of(kind) : 0);
}

BoundModel::BoundModel(Graph& g, const ModelParams& params, bool trainable) : graph_(&g), params_(&params) {
  vars_.reserve(params.tensors().size());
  for (const NamedTensor& t : params.tensors()) vars_.push_back(trainable ? g.variable(t.value) : g.constant(t.value));
}

Var BoundModel::operator[](std::string_view name) const {
  const auto& ts = params_->tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].name == name) return vars_[i];
  }
  throw ArgumentError("model has no parameter '" + std::string(name) + "'");
}

LinearVars BoundModel::head() const { return {(*this)["head.w"], (*this)["head.b"]}; }

FiLMVars BoundModel::film() const {
  return {{(*this)["film.gamma.w"], (*this)["film.gamma.b"]}, {(*this)["film.beta.w"], (*this)["film.beta.b"]}};
}

Var encode(Var x, const BoundModel& m) {
  const ModelSpec& spec = m.params().spec();
  if (x.cols() != spec.input_bins) {
    throw DimensionError("encode: expected " + std::to_string(spec.input_bins) + " input bins, got " +
                         shape_string(x.value()));
  }
  if (x.rows() % spec.total_pool() != 0) {
    throw DimensionError("encode: " + std::to_string(x.rows()) + " frames not divisible by cumulative pool " +
                         std::to_string(spec.total_pool()));
  }
  Var h = linear(x, m["frontend.w"], m["frontend.b"]);
  for (Index k = 0; k < spec.num_blocks; ++k) {
    const std::string p = "block" + std::to_string(k) + ".";
    Var inner = relu(linear(h, m[p + "w1"], m[p + "b1"]));
    h = add(linear(inner, m[p + "w2"], m[p + "b2"]), h);
    if (spec.pool_factor_per_block > 1) h = mean_pool_time(h, spec.pool_factor_per_block);
  }
  return h;
}

Var decode(Var z, const BoundModel& m, Index frames_per_example) {
  Var w1 = m["decoder.w1"];
  if (z.cols() != w1.rows()) {
    throw DimensionError("decode: decoder expects width " + std::to_string(w1.rows()) + ", got " +
                         shape_string(z.value()));
  }
  if (frames_per_example < 1 || z.rows() % frames_per_example != 0) {
    throw DimensionError("decode: " + std::to_string(z.rows()) + " frames do not split into examples of " +
                         std::to_string(frames_per_example));
  }
  Var pooled = mean_pool_time(z, frames_per_example);
  Var hidden = relu(linear(pooled, w1, m["decoder.b1"]));
  return sigmoid(linear(hidden, m["decoder.w2"], m["decoder.b2"]));
}

Var predict(const BoundModel& m, Var x, Var v_aligned, Index frames_per_example, Var* embedding) {
  const Method method = m.params().method();
  if (method == Method::FeatureOnly) return feature_only_forward(v_aligned, m, frames_per_example);
  Var l = encode(x, m);
  if (embedding) *embedding = l;
  switch (method) {
    case Method::Concat:
      return decode(concat_embed(l, v_aligned), m, frames_per_example);
    case Method::FiLM:
      return decode(film_transform(l, v_aligned, m.film()), m, frames_per_example);
    default:
      return decode(l, m, frames_per_example);
  }
}

// Checkpoint ----------------------------------------------------------------

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, Phase phase) {
  io::ByteWriter w;
  w.put_bytes("EMBR");
  w.put<std::uint32_t>(kCheckpointVersion);
  const ModelSpec& s = params.spec();
  for (Index v : {s.input_bins, s.embed_dim, s.num_blocks, s.decoder_hidden, s.num_classes, s.pool_factor_per_block}) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.method()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.feature_kind()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.feature_dims()));

  std::vector<const NamedTensor*> kept;
  for (const NamedTensor& t : params.tensors()) {
    if (phase == Phase::Training || t.role == ParamRole::Inference) kept.push_back(&t);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kept.size()));
  for (const NamedTensor* t : kept) {
    w.put_string(t->name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t->role));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t->value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t->value.cols()));
    w.put_f32(t->value);
  }
  return std::move(w.bytes());
}

ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "EMBR", 4) != 0) throw FormatError("bad magic", 0);
  io::ByteReader r(bytes);
  r.skip(4);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("version mismatch (found " + std::to_string(version) + ")", 4);
  }
  ModelSpec spec;
  for (Index* field : {&spec.input_bins, &spec.embed_dim, &spec.num_blocks, &spec.decoder_hidden, &spec.num_classes,
                       &spec.pool_factor_per_block}) {
    *field = r.get<std::uint32_t>("model spec");
  }
  const std::size_t method_at = r.offset();
  const auto method = r.get<std::uint32_t>("method");
  const auto kind = r.get<std::uint32_t>("feature kind");
  const auto feature_dims = r.get<std::uint32_t>("feature dims");
  if (method > static_cast<std::uint32_t>(Method::DisReg) || kind > static_cast<std::uint32_t>(FeatureKind::Combined)) {
    throw FormatError("unknown method or feature kind", method_at);
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string("tensor name");
    const auto role = r.get<std::uint8_t>("tensor role");
    const auto rows = r.get<std::uint32_t>("tensor rows");
    const auto cols = r.get<std::uint32_t>("tensor cols");
    Tensor value = r.get_f32(rows, cols, "tensor payload");
    tensors.push_back({std::move(name), std::move(value), role == 0 ? ParamRole::Inference : ParamRole::TrainingOnly});
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after tensors", r.offset());

  std::vector<ParamShape> expected;
  try {
    expected = parameter_layout(spec, static_cast<Method>(method), feature_dims);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model header: ") + e.what(), 8);
  }
  for (const ParamShape& s : expected) {
    if (s.role == ParamRole::TrainingOnly) continue;
    const auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == s.name; });
    if (it == tensors.end()) throw FormatError("missing tensor " + s.name, bytes.size());
    if (it->value.rows() != s.rows || it->value.cols() != s.cols) {
      throw FormatError("tensor " + s.name + " has shape " + shape_string(it->value) + ", expected " +
                            std::to_string(s.rows) + "x" + std::to_string(s.cols),
                        bytes.size());
    }
  }
  return ModelParams(spec, static_cast<Method>(method), static_cast<FeatureKind>(kind), feature_dims,
                     std::move(tensors));
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path, Phase phase) {
  io::write_file(path, encode_checkpoint(params, phase));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail, e.offset);
  }
}

}  // namespace embreg
