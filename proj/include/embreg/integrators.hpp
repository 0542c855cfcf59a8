#pragma once

#include "embreg/regularizers.hpp"

namespace embreg {

class BoundModel;

/// Conditioning maps of a FiLM layer: gamma(v) and beta(v), each one linear layer.
struct FiLMParams {
  ProjectionHead gamma;
  ProjectionHead beta;

  /// Gamma starts at the identity modulation (bias 1), beta at zero bias.
  static FiLMParams init(Index feature_dims, Index embed_dims, Rng rng);
  Index parameter_count() const { return gamma.parameter_count() + beta.parameter_count(); }
};

struct FiLMVars {
  LinearVars gamma;
  LinearVars beta;
};

FiLMVars bind(Graph& g, const FiLMParams& p, bool trainable);

/// Per frame: gamma_t * l_t + beta_t with gamma_t, beta_t computed from v_t.
Var film_transform(Var l, Var v_aligned, const FiLMVars& p);

/// [l | v] along the feature axis.
Var concat_embed(Var l, Var v_aligned);

/// Decoder applied straight to the features; the encoder is never evaluated.
/// The decoder must have been built with input width B_F.
Var feature_only_forward(Var v_aligned, const BoundModel& decoder, Index frames_per_example);

}  // namespace embreg
