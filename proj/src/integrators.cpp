#include "embreg/integrators.hpp"

#include "embreg/model.hpp"

namespace embreg {

FiLMParams FiLMParams::init(Index feature_dims, Index embed_dims, Rng rng) {
  FiLMParams p{ProjectionHead::init(feature_dims, embed_dims, rng.split("gamma")),
               ProjectionHead::init(feature_dims, embed_dims, rng.split("beta"))};
  p.gamma.bias.setOnes();
  return p;
}

FiLMVars bind(Graph& g, const FiLMParams& p, bool trainable) {
  return {bind(g, p.gamma, trainable), bind(g, p.beta, trainable)};
}

Var film_transform(Var l, Var v_aligned, const FiLMVars& p) {
  if (l.rows() != v_aligned.rows()) {
    throw DimensionError("film_transform: embedding " + shape_string(l.value()) + " and features " +
                         shape_string(v_aligned.value()) + " are not time-aligned");
  }
  Var gamma = apply(p.gamma, v_aligned);
  Var beta = apply(p.beta, v_aligned);
  if (gamma.cols() != l.cols()) {
    throw DimensionError("film_transform: modulation width " + std::to_string(gamma.cols()) +
                         " does not match embedding " + shape_string(l.value()));
  }
  return add(mul(gamma, l), beta);
}

Var concat_embed(Var l, Var v_aligned) { return concat_cols(l, v_aligned); }

Var feature_only_forward(Var v_aligned, const BoundModel& decoder, Index frames_per_example) {
  const Index width = decoder["decoder.w1"].rows();
  if (v_aligned.cols() != width) {
    throw DimensionError("feature_only_forward: decoder expects width " + std::to_string(width) + ", features are " +
                         shape_string(v_aligned.value()));
  }
  return decode(v_aligned, decoder, frames_per_example);
}

}  // namespace embreg
