#include "qgnn/loss.hpp"

#include "qgnn/errors.hpp"

namespace qgnn {

LossKind parse_loss(const std::string& text) {
  if (text == "bce") return LossKind::bce_masked;
  if (text == "ce") return LossKind::ce;
  if (text == "l1") return LossKind::l1_output;
  if (text == "kl") return LossKind::kl_pointwise;
  throw ParameterError("unknown loss '" + text + "' (expected bce, ce, l1 or kl)");
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::bce_masked: return "bce";
    case LossKind::ce: return "ce";
    case LossKind::l1_output: return "l1";
    case LossKind::kl_pointwise: return "kl";
  }
  return "?";
}

BatchTargets batch_targets(const Dataset& dataset, std::span<const std::size_t> indices) {
  BatchTargets t;
  if (dataset.task_kind == TaskKind::multiclass) {
    for (auto g : indices) t.classes.push_back(dataset.class_targets.at(g));
    return t;
  }
  const auto tasks = static_cast<std::size_t>(dataset.num_tasks);
  t.values = Tensor(indices.size(), tasks);
  t.mask = Tensor(indices.size(), tasks);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    for (std::size_t k = 0; k < tasks; ++k) {
      const auto b = dataset.binary_target(indices[r], static_cast<int>(k));
      if (b == BinaryTarget::missing) continue;
      t.mask(r, k) = 1.0;
      t.values(r, k) = b == BinaryTarget::positive ? 1.0 : 0.0;
    }
  }
  return t;
}

Var supervised_loss(Tape& tape, LossKind kind, Var logits, const BatchTargets& targets) {
  switch (kind) {
    case LossKind::bce_masked:
      if (targets.values.size() == 0) throw ParameterError("bce needs binary targets");
      return tape.bce_with_logits_masked(logits, targets.values, targets.mask);
    case LossKind::ce:
      if (targets.classes.empty()) throw ParameterError("ce needs class targets");
      return tape.nll_mean(tape.log_softmax_rowwise(logits), targets.classes);
    default:
      throw ParameterError(std::string("'") + to_string(kind) + "' is not a supervised loss");
  }
}

Var output_loss(Tape& tape, LossKind kind, Var logits_a, Var logits_b, bool multiclass) {
  if (!tape.value(logits_a).same_shape(tape.value(logits_b))) throw DimensionError("output pair shapes differ");
  auto probs = [&](Var z) { return multiclass ? tape.softmax_rowwise(z) : tape.sigmoid(z); };
  Var pa = probs(logits_a);
  Var pb = probs(logits_b);
  if (kind == LossKind::l1_output) return tape.mean_all(tape.abs(tape.sub(pa, pb)));
  if (kind != LossKind::kl_pointwise) throw ParameterError(std::string("'") + to_string(kind) + "' is not an output loss");

  const double rows = static_cast<double>(tape.value(logits_a).rows());
  auto clamped = [&](Var p) { return tape.clamp(p, kProbClamp, 1.0 - kProbClamp); };
  auto kl_terms = [&](Var p, Var q) { return tape.mul(p, tape.sub(tape.log(p), tape.log(q))); };
  Var terms = kl_terms(clamped(pa), clamped(pb));
  if (!multiclass) {
    // 1 - sigmoid(z) as sigmoid(-z): no cancellation when p is close to 1
    auto complement = [&](Var z) { return clamped(tape.sigmoid(tape.scale(z, -1.0))); };
    terms = tape.add(terms, kl_terms(complement(logits_a), complement(logits_b)));
  }
  return tape.scale(tape.sum_all(terms), 1.0 / rows);
}

}  // namespace qgnn
