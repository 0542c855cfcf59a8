#include "embreg/integrators.hpp"
#include "embreg/model.hpp"

#include <gtest/gtest.h>

using namespace embreg;

namespace {

Tensor random_tensor(Index r, Index c, Rng& rng) {
  Tensor t(r, c);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

}  // namespace

TEST(FiLM, InitIsIdentityGainWithZeroBiasShift) {
  const FiLMParams p = FiLMParams::init(12, 4, Rng(2));
  EXPECT_TRUE(p.gamma.bias.isOnes());
  EXPECT_TRUE(p.beta.bias.isZero());
  EXPECT_EQ(p.parameter_count(), 2 * (12 * 4 + 4));
}

TEST(FiLM, MatchesAffineOracle) {
  Rng rng(4);
  FiLMParams p = FiLMParams::init(5, 3, rng);
  p.gamma.bias = random_tensor(1, 3, rng);
  p.beta.bias = random_tensor(1, 3, rng);
  const Tensor l = random_tensor(6, 3, rng), v = random_tensor(6, 5, rng);
  const Tensor gamma = (v * p.gamma.weight).rowwise() + p.gamma.bias.row(0);
  const Tensor beta = (v * p.beta.weight).rowwise() + p.beta.bias.row(0);
  const Tensor expected = gamma.cwiseProduct(l) + beta;
  Graph g;
  EXPECT_TRUE(film_transform(g.constant(l), g.constant(v), bind(g, p, false)).value().isApprox(expected, 1e-12));
}

TEST(FiLM, ZeroWeightsLeaveEmbeddingUnchanged) {
  Rng rng(5);
  FiLMParams p = FiLMParams::init(5, 3, rng);
  p.gamma.weight.setZero();
  p.beta.weight.setZero();
  const Tensor l = random_tensor(4, 3, rng);
  Graph g;
  EXPECT_EQ(film_transform(g.constant(l), g.constant(random_tensor(4, 5, rng)), bind(g, p, false)).value(), l);
}

TEST(FiLM, RejectsMisalignedTime) {
  const FiLMParams p = FiLMParams::init(5, 3, Rng(1));
  Graph g;
  EXPECT_THROW(film_transform(g.constant(Tensor::Ones(4, 3)), g.constant(Tensor::Ones(3, 5)), bind(g, p, false)),
               DimensionError);
}

TEST(FiLM, GradientsWrtEmbeddingAndFeatures) {
  Rng rng(6);
  const FiLMParams p = FiLMParams::init(5, 3, rng);
  const Tensor l = random_tensor(4, 3, rng), v = random_tensor(4, 5, rng), w = random_tensor(4, 3, rng);
  const GraphBuilder wrt_l = [&](Graph& g, Var x) {
    return sum(mul(film_transform(x, g.constant(v), bind(g, p, false)), g.constant(w)));
  };
  const GraphBuilder wrt_v = [&](Graph& g, Var x) {
    return sum(mul(film_transform(g.constant(l), x, bind(g, p, false)), g.constant(w)));
  };
  EXPECT_LT(grad_check(wrt_l, l), 1e-6);
  EXPECT_LT(grad_check(wrt_v, v), 1e-6);
}

TEST(Concat, EmbeddingColumnsFirst) {
  Rng rng(7);
  const Tensor l = random_tensor(3, 2, rng), v = random_tensor(3, 4, rng);
  Graph g;
  const Tensor out = concat_embed(g.constant(l), g.constant(v)).value();
  EXPECT_EQ(out.leftCols(2), l);
  EXPECT_EQ(out.rightCols(4), v);
}

TEST(FeatureOnly, DecoderWidthMustMatchFeatures) {
  ModelSpec spec;
  const ModelParams p = ModelParams::init(spec, Method::FeatureOnly, FeatureKind::A, 6, Rng(1));
  Graph g;
  BoundModel m(g, p, false);
  EXPECT_EQ(feature_only_forward(g.constant(Tensor::Ones(8, 6)), m, 4).rows(), 2);
  EXPECT_THROW(feature_only_forward(g.constant(Tensor::Ones(8, 5)), m, 4), DimensionError);
}
