#include "embreg/model.hpp"
#include "embreg/regularizers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

using namespace embreg;

namespace {

// Hand count of the bare encoder-decoder, independent of parameter_layout.
std::int64_t bare_count(const ModelSpec& s) {
  const std::int64_t E = s.embed_dim;
  const std::int64_t frontend = s.input_bins * E + E;
  const std::int64_t blocks = s.num_blocks * 2 * (E * E + E);
  const std::int64_t decoder = E * s.decoder_hidden + s.decoder_hidden + s.decoder_hidden * s.num_classes +
                               s.num_classes;
  return frontend + blocks + decoder;
}

std::set<std::string> names(const std::vector<ParamShape>& layout) {
  std::set<std::string> out;
  for (const auto& s : layout) out.insert(s.name);
  return out;
}

}  // namespace

TEST(ModelSpec, DefaultsAndValidation) {
  ModelSpec s;
  EXPECT_EQ(s.total_pool(), 1);
  EXPECT_DOUBLE_EQ(s.embedding_period(0.1), 0.1);
  s.pool_factor_per_block = 2;
  s.num_blocks = 3;
  EXPECT_EQ(s.total_pool(), 8);
  s.embed_dim = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Layout, TensorsPresentPerMethod) {
  const ModelSpec s;
  const auto none = names(parameter_layout(s, Method::None, 0));
  EXPECT_TRUE(none.count("frontend.w"));
  EXPECT_TRUE(none.count("block6.w2"));
  EXPECT_FALSE(none.count("head.w"));

  const auto fo = names(parameter_layout(s, Method::FeatureOnly, 640));
  EXPECT_FALSE(fo.count("frontend.w"));
  EXPECT_TRUE(fo.count("decoder.w1"));

  EXPECT_TRUE(names(parameter_layout(s, Method::ConReg, 640)).count("head.w"));
  EXPECT_TRUE(names(parameter_layout(s, Method::FiLM, 640)).count("film.beta.b"));
  EXPECT_EQ(names(parameter_layout(s, Method::DisReg, 640)), none);
  EXPECT_THROW(parameter_layout(s, Method::ConReg, 0), ConfigError);
}

TEST(Layout, DecoderWidthPerMethod) {
  const ModelSpec s;
  EXPECT_EQ(decoder_input_width(s, Method::None, 640), s.embed_dim);
  EXPECT_EQ(decoder_input_width(s, Method::Concat, 640), s.embed_dim + 640);
  EXPECT_EQ(decoder_input_width(s, Method::FeatureOnly, 128), 128);
  EXPECT_EQ(decoder_input_width(s, Method::FiLM, 640), s.embed_dim);
}

TEST(ParamCounts, MatchHandCount) {
  const ModelSpec s;
  const ExtractorCosts costs;
  for (FeatureKind k : {FeatureKind::A, FeatureKind::B, FeatureKind::Combined}) {
    const std::int64_t F = layout(k).dims, E = s.embed_dim;
    const std::int64_t bare = bare_count(s);
    EXPECT_EQ(count_params(s, Method::None, k, Phase::Inference), bare);
    EXPECT_EQ(count_params(s, Method::ConReg, k, Phase::Inference), bare);
    EXPECT_EQ(count_params(s, Method::DisReg, k, Phase::Inference), bare);
    EXPECT_EQ(count_params(s, Method::ConReg, k, Phase::Training) - count_params(s, Method::DisReg, k, Phase::Training),
              F * E + E);
    EXPECT_EQ(count_params(s, Method::Concat, k, Phase::Training), bare + F * s.decoder_hidden);
    EXPECT_EQ(count_params(s, Method::Concat, k, Phase::Inference), bare + F * s.decoder_hidden + costs.of(k));
    EXPECT_EQ(count_params(s, Method::FiLM, k, Phase::Training), bare + 2 * (F * E + E));
    EXPECT_EQ(count_params(s, Method::FeatureOnly, k, Phase::Inference) - costs.of(k),
              F * s.decoder_hidden + s.decoder_hidden + s.decoder_hidden * s.num_classes + s.num_classes);
  }
  EXPECT_EQ(costs.of(FeatureKind::A), 72'200'000);
  EXPECT_EQ(costs.of(FeatureKind::B), 4'800'000);
  EXPECT_EQ(costs.of(FeatureKind::Combined), 77'000'000);
}

TEST(ParamCounts, InstanceAgreesWithSpecCount) {
  const ModelSpec s;
  for (Method m : kAllMethods) {
    const ModelParams p = ModelParams::init(s, m, FeatureKind::B, Rng(3));
    EXPECT_EQ(count_params(p, Phase::Training), count_params(s, m, FeatureKind::B, Phase::Training));
    EXPECT_EQ(count_params(p, Phase::Inference), count_params(s, m, FeatureKind::B, Phase::Inference));
    EXPECT_EQ(p.has_training_only(), m == Method::ConReg);
  }
}

TEST(Init, SharedTensorsMatchAcrossMethods) {
  const ModelSpec s;
  const ModelParams none = ModelParams::init(s, Method::None, FeatureKind::Combined, Rng(5));
  const ModelParams con = ModelParams::init(s, Method::ConReg, FeatureKind::Combined, Rng(5));
  for (const NamedTensor& t : none.tensors()) EXPECT_EQ(con.at(t.name), t.value) << t.name;
  EXPECT_TRUE(con.at("frontend.b").isZero());
  EXPECT_FALSE(con.at("head.w").isZero());
}

TEST(Forward, ShapesAndProbabilityRange) {
  ModelSpec s;
  s.pool_factor_per_block = 1;
  Rng rng(8);
  for (Method m : kAllMethods) {
    const ModelParams p = ModelParams::init(s, m, FeatureKind::A, rng.split(static_cast<std::uint64_t>(m)));
    Graph g;
    BoundModel bm(g, p, false);
    Tensor x(12, s.input_bins), v(12, 128);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
    Var emb;
    const Tensor out = predict(bm, g.constant(x), g.constant(v), 4, &emb).value();
    ASSERT_EQ(out.rows(), 3) << to_string(m);
    ASSERT_EQ(out.cols(), s.num_classes);
    EXPECT_TRUE((out.array() > 0.0).all() && (out.array() < 1.0).all());
    if (m != Method::FeatureOnly) EXPECT_EQ(emb.rows(), 12);
  }
}

TEST(Forward, PoolingShrinksEmbeddingGrid) {
  ModelSpec s;
  s.num_blocks = 2;
  s.pool_factor_per_block = 2;
  const ModelParams p = ModelParams::init(s, Method::None, FeatureKind::A, Rng(1));
  Graph g;
  BoundModel bm(g, p, false);
  EXPECT_EQ(encode(g.constant(Tensor::Ones(16, s.input_bins)), bm).rows(), 4);
  EXPECT_THROW(encode(g.constant(Tensor::Ones(10, s.input_bins)), bm), DimensionError);
  EXPECT_THROW(encode(g.constant(Tensor::Ones(16, 3)), bm), DimensionError);
}

TEST(Forward, ExampleOrderDoesNotLeakAcrossBatch) {
  // Stacked batches give each example the same scores as running it alone.
  const ModelSpec s;
  const ModelParams p = ModelParams::init(s, Method::None, FeatureKind::A, Rng(2));
  Rng rng(4);
  Tensor x(8, s.input_bins);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Graph g;
  BoundModel bm(g, p, false);
  Var unused = g.constant(Tensor(0, 0));
  const Tensor both = predict(bm, g.constant(x), unused, 4).value();
  const Tensor first = predict(bm, g.constant(Tensor(x.topRows(4))), unused, 4).value();
  EXPECT_TRUE(both.row(0).isApprox(first.row(0), 1e-14));
}

TEST(Checkpoint, RoundTripAndInferencePhaseDropsHead) {
  const ModelSpec s;
  ModelParams p = ModelParams::init(s, Method::ConReg, FeatureKind::Combined, Rng(6));
  for (NamedTensor& t : p.tensors()) {
    for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = static_cast<float>(t.value.data()[i]);
  }
  const ModelParams full = decode_checkpoint(encode_checkpoint(p, Phase::Training));
  EXPECT_EQ(full.spec(), s);
  EXPECT_EQ(full.method(), Method::ConReg);
  ASSERT_EQ(full.tensors().size(), p.tensors().size());
  for (const NamedTensor& t : p.tensors()) EXPECT_EQ(full.at(t.name), t.value);

  const ModelParams slim = decode_checkpoint(encode_checkpoint(p, Phase::Inference));
  EXPECT_EQ(slim.find("head.w"), nullptr);
  EXPECT_FALSE(slim.has_training_only());
  EXPECT_EQ(count_params(slim, Phase::Inference), count_params(p, Phase::Inference));

  const auto path = std::filesystem::temp_directory_path() / "embreg_ckpt_test.embr";
  save_checkpoint(p, path);
  EXPECT_EQ(load_checkpoint(path).tensors().size(), slim.tensors().size());
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptionIsFormatError) {
  const ModelParams p = ModelParams::init(ModelSpec{}, Method::None, FeatureKind::A, Rng(1));
  const auto good = encode_checkpoint(p, Phase::Inference);
  auto bad = good;
  bad[0] = 'Z';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = good;
  bad.resize(bad.size() / 2);
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = good;
  bad.push_back(1);
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = good;
  bad[4] = 7;  // version
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = good;
  bad[12] = 17;  // embed_dim no longer matches the stored tensors
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.embr"), LoadError);
}

TEST(Decode, HandSizedOracle) {
  ModelSpec s;
  s.input_bins = 1;
  s.embed_dim = 2;
  s.num_blocks = 1;
  s.decoder_hidden = 2;
  s.num_classes = 1;
  ModelParams p = ModelParams::init(s, Method::None, FeatureKind::A, Rng(1));
  const auto set = [&](const std::string& name, std::initializer_list<double> values) {
    for (NamedTensor& t : p.tensors()) {
      if (t.name == name) std::copy(values.begin(), values.end(), t.value.data());
    }
  };
  // Row-major storage.
  set("decoder.w1", {1.0, -1.0, 0.5, 2.0});
  set("decoder.b1", {0.1, -0.2});
  set("decoder.w2", {0.7, -0.3});
  set("decoder.b2", {0.05});
  const double z0 = 0.4, z1 = -0.6;
  const double h0 = std::max(0.0, z0 * 1.0 + z1 * 0.5 + 0.1);
  const double h1 = std::max(0.0, z0 * -1.0 + z1 * 2.0 - 0.2);
  const double expected = 1.0 / (1.0 + std::exp(-(h0 * 0.7 + h1 * -0.3 + 0.05)));

  Graph g;
  BoundModel bm(g, p, false);
  Tensor z(1, 2);
  z << z0, z1;
  EXPECT_NEAR(decode(g.constant(z), bm, 1).value()(0, 0), expected, 1e-12);
  // Duplicated frames pool back to the same vector.
  const Tensor tripled = z.replicate(3, 1);
  EXPECT_EQ(decode(g.constant(tripled), bm, 3).value()(0, 0), decode(g.constant(z), bm, 1).value()(0, 0));
}

TEST(Encode, ZeroInputWithZeroBiasesGivesZeroEmbedding) {
  const ModelSpec s;
  const ModelParams p = ModelParams::init(s, Method::None, FeatureKind::A, Rng(6));
  Graph g;
  BoundModel bm(g, p, false);
  const Tensor l = encode(g.constant(Tensor::Zero(8, s.input_bins)), bm).value();
  EXPECT_EQ(l.rows(), 8);
  EXPECT_TRUE((l.array() == 0.0).all());
}

TEST(Gradients, NoneUpdatesExactlyTheInferenceSet) {
  ModelSpec s;
  s.num_blocks = 2;
  const ModelParams p = ModelParams::init(s, Method::None, FeatureKind::A, Rng(3));
  Graph g;
  BoundModel bm(g, p, true);
  Rng rng(5);
  Tensor x(6, s.input_bins);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Tensor y = Tensor::Zero(2, s.num_classes);
  y(0, 1) = y(1, 3) = 1.0;
  g.backward(bce_loss(predict(bm, g.constant(x), g.constant(Tensor(0, 0)), 3), y));
  std::set<std::string> with_grad, inference;
  for (std::size_t i = 0; i < bm.vars().size(); ++i) {
    if (bm.vars()[i].grad().size() > 0) with_grad.insert(p.tensors()[i].name);
    if (p.tensors()[i].role == ParamRole::Inference) inference.insert(p.tensors()[i].name);
  }
  EXPECT_EQ(with_grad, inference);
}

// Miniature model: analytic parameter gradients against central differences
// of the full loss, every entry of every tensor.
TEST(Gradients, FullModelMatchesFiniteDifferences) {
  ModelSpec s;
  s.input_bins = 8;
  s.embed_dim = 6;
  s.num_blocks = 2;
  s.decoder_hidden = 5;
  s.num_classes = 3;
  const Index F = 4, T = 3, batch = 2;
  Rng rng(12);
  Tensor x(T * batch, s.input_bins), v(T * batch, F), y = Tensor::Zero(batch, s.num_classes);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
  y(0, 0) = y(1, 2) = 1.0;

  for (Method m : {Method::None, Method::ConReg, Method::Concat, Method::FiLM, Method::FeatureOnly}) {
    ModelParams p = ModelParams::init(s, m, FeatureKind::A, F, rng.split(static_cast<std::uint64_t>(m)));
    // Move biases off zero so every path carries signal.
    for (NamedTensor& t : p.tensors()) {
      for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += 0.1 * rng.normal();
    }
    const auto loss = [&](const ModelParams& params, Graph& g, bool trainable) {
      BoundModel bm(g, params, trainable);
      Var emb;
      Var task = bce_loss(predict(bm, g.constant(x), g.constant(v), T, &emb), y);
      if (m != Method::ConReg) return std::pair{task, bm};
      return std::pair{compose_loss(task, con_reg_loss(emb, g.constant(v), bm.head()), 5.0), bm};
    };
    Graph g;
    auto [root, bm] = loss(p, g, true);
    g.backward(root);
    double worst = 0.0;
    for (std::size_t k = 0; k < p.tensors().size(); ++k) {
      const Tensor analytic = bm.vars()[k].grad();
      ASSERT_EQ(analytic.size(), p.tensors()[k].value.size()) << p.tensors()[k].name;
      for (Index i = 0; i < analytic.size(); ++i) {
        const double h = 1e-5;
        ModelParams plus = p, minus = p;
        plus.tensors()[k].value.data()[i] += h;
        minus.tensors()[k].value.data()[i] -= h;
        Graph gp, gm;
        const double numeric = (loss(plus, gp, false).first.scalar() - loss(minus, gm, false).first.scalar()) / (2 * h);
        const double a = analytic.data()[i];
        worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a), 1.0));
      }
    }
    EXPECT_LT(worst, 1e-4) << to_string(m);
  }
}
