#include "embreg/regularizers.hpp"

#include <numeric>

namespace embreg {

ProjectionHead ProjectionHead::init(Index in_dims, Index out_dims, Rng rng) {
  if (in_dims < 1 || out_dims < 1) throw DimensionError("projection head needs positive dims");
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dims + out_dims));
  ProjectionHead head{Tensor(in_dims, out_dims), Tensor::Zero(1, out_dims)};
  for (Index i = 0; i < head.weight.size(); ++i) head.weight.data()[i] = rng.uniform(-limit, limit);
  return head;
}

LinearVars bind(Graph& g, const ProjectionHead& head, bool trainable) {
  if (trainable) return {g.variable(head.weight), g.variable(head.bias)};
  return {g.constant(head.weight), g.constant(head.bias)};
}

Var apply(const LinearVars& map, Var x) {
  if (x.cols() != map.weight.rows()) {
    throw DimensionError("linear map expects " + std::to_string(map.weight.rows()) + " input dims, got " +
                         shape_string(x.value()));
  }
  return linear(x, map.weight, map.bias);
}

Var con_reg_loss(Var l, Var v_aligned, const LinearVars& head) {
  if (v_aligned.rows() != l.rows()) {
    throw DimensionError("con_reg_loss: embedding " + shape_string(l.value()) + " and features " +
                         shape_string(v_aligned.value()) + " are not time-aligned");
  }
  return cosine_distance_frames(l, apply(head, v_aligned));
}

Var dis_reg_loss(std::span<const Var> batch_l, std::span<const Tensor> batch_v) {
  if (batch_l.size() < 2) throw ContractError("Dis-Reg requires a pair");
  if (batch_v.size() != batch_l.size()) {
    throw DimensionError("dis_reg_loss: " + std::to_string(batch_l.size()) + " embeddings but " +
                         std::to_string(batch_v.size()) + " feature matrices");
  }
  Graph& g = batch_l.front().graph();
  const std::size_t n = batch_l.size();
  std::vector<Var> terms;
  terms.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dv = frame_cosine_distance(batch_v[i], batch_v[j]);
      Var dl = cosine_distance_frames(batch_l[i], batch_l[j]);
      terms.push_back(abs(sub(dl, g.constant(Tensor::Constant(1, 1, dv)))));
    }
  }
  std::stable_sort(terms.begin(), terms.end(), [](Var a, Var b) { return a.scalar() < b.scalar(); });
  return scale(add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

Var compose_loss(Var task_loss, std::optional<Var> reg_loss, double alpha) {
  if (!reg_loss) return task_loss;
  return add(task_loss, scale(*reg_loss, alpha));
}

}  // namespace embreg
