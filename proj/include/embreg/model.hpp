#pragma once

#include "embreg/autodiff.hpp"
#include "embreg/feature_store.hpp"
#include "embreg/integrators.hpp"
#include "embreg/method.hpp"
#include "embreg/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace embreg {

/// Encoder-decoder classifier shape. The encoder is a per-frame linear
/// front-end followed by `num_blocks` residual blocks, each ending in a time
/// mean-pool by `pool_factor_per_block`; the decoder is two linear layers.
struct ModelSpec {
  Index input_bins = 16;
  Index embed_dim = 64;
  Index num_blocks = 7;
  Index decoder_hidden = 32;
  Index num_classes = 8;
  Index pool_factor_per_block = 1;

  void validate() const;
  /// pool_factor_per_block ^ num_blocks
  Index total_pool() const;
  double embedding_period(double input_period_s) const { return input_period_s * static_cast<double>(total_pool()); }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Inference parameters ship with the model; training-only ones (the
/// Con-Reg projection head) are dropped after training.
enum class ParamRole : std::uint8_t { Inference = 0, TrainingOnly = 1 };
enum class Phase { Training, Inference };

struct ParamShape {
  std::string name;
  Index rows;
  Index cols;
  ParamRole role;
};

/// Names and shapes of every trainable tensor for a method. Encoder tensors are
/// absent for FeatureOnly; `head.*` exists only for ConReg; `film.*` only for FiLM.
std::vector<ParamShape> parameter_layout(const ModelSpec& spec, Method method, Index feature_dims);

/// Width of the decoder's first layer: B_E, B_F or B_E + B_F by method.
Index decoder_input_width(const ModelSpec& spec, Method method, Index feature_dims);

struct NamedTensor {
  std::string name;
  Tensor value;
  ParamRole role;
};

/// Parameter count of the external extractor a method must run at inference.
struct ExtractorCosts {
  std::int64_t a = 72'200'000;
  std::int64_t b = 4'800'000;
  std::int64_t combined = 77'000'000;

  std::int64_t of(FeatureKind kind) const;
};

class ModelParams {
 public:
  /// Fan-based uniform weights, zero biases (FiLM gamma bias starts at one).
  /// Each tensor draws from its own named RNG stream, so the shared tensors of
  /// two methods initialize identically under the same seed.
  static ModelParams init(const ModelSpec& spec, Method method, FeatureKind kind, Rng rng);
  static ModelParams init(const ModelSpec& spec, Method method, FeatureKind kind, Index feature_dims, Rng rng);

  ModelParams(ModelSpec spec, Method method, FeatureKind kind, Index feature_dims, std::vector<NamedTensor> tensors);

  const ModelSpec& spec() const { return spec_; }
  Method method() const { return method_; }
  FeatureKind feature_kind() const { return kind_; }
  Index feature_dims() const { return feature_dims_; }

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  const Tensor* find(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  bool has_training_only() const;

  /// Scalars in the given role.
  std::int64_t count(ParamRole role) const;
  /// Copy holding only inference tensors.
  ModelParams inference_only() const;

 private:
  ModelSpec spec_;
  Method method_;
  FeatureKind kind_;
  Index feature_dims_;
  std::vector<NamedTensor> tensors_;
};

/// Scalar count of the training or inference parameter set. Inference counts
/// include the extractor cost for methods that consume features at inference.
std::int64_t count_params(const ModelParams& params, Phase phase, const ExtractorCosts& costs = {});
std::int64_t count_params(const ModelSpec& spec, Method method, FeatureKind kind, Phase phase,
                          const ExtractorCosts& costs = {});

/// ModelParams bound into a graph as leaves, one Var per tensor.
class BoundModel {
 public:
  BoundModel(Graph& g, const ModelParams& params, bool trainable);

  Var operator[](std::string_view name) const;
  const ModelParams& params() const { return *params_; }
  Graph& graph() const { return *graph_; }
  /// Parallel to params().tensors().
  const std::vector<Var>& vars() const { return vars_; }

  LinearVars head() const;
  FiLMVars film() const;

 private:
  Graph* graph_;
  const ModelParams* params_;
  std::vector<Var> vars_;
};

/// x: stacked examples, each a whole number of `total_pool()` frames.
/// Returns the embedding l with T_in / total_pool() rows per example.
Var encode(Var x, const BoundModel& m);

/// Mean-pools each run of `frames_per_example` rows to one vector, then
/// linear -> relu -> linear -> sigmoid. Returns one row of C probabilities per example.
Var decode(Var z, const BoundModel& m, Index frames_per_example);

/// Full forward pass for the bound method. `x` is the stacked input (unused for
/// FeatureOnly); `v_aligned` holds features on the embedding grid (unused for
/// None/ConReg/DisReg). When `embedding` is non-null it receives the encoder output.
Var predict(const BoundModel& m, Var x, Var v_aligned, Index frames_per_example, Var* embedding = nullptr);

// EMBR checkpoint -----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, Phase phase);
ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path, Phase phase = Phase::Inference);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace embreg
