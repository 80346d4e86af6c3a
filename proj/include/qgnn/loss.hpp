#pragma once

#include <optional>
#include <string>

#include "qgnn/graph.hpp"
#include "qgnn/tape.hpp"

namespace qgnn {

enum class LossKind { bce_masked, ce, l1_output, kl_pointwise };

LossKind parse_loss(const std::string& text);
const char* to_string(LossKind kind);

/// True for the losses comparing two model outputs.
inline bool is_output_loss(LossKind k) { return k == LossKind::l1_output || k == LossKind::kl_pointwise; }

/// Supervised targets aligned with a batch's logits.
struct BatchTargets {
  Tensor values;              // binary: 0/1 per entry; multiclass: unused
  Tensor mask;                // binary: 1 where the target is present
  std::vector<int> classes;   // multiclass
};

BatchTargets batch_targets(const Dataset& dataset, std::span<const std::size_t> indices);

/// Output-pair probabilities are sigmoid(binary) or softmax(multiclass)
/// clamped to [1e-7, 1 - 1e-7].
inline constexpr double kProbClamp = 1e-7;

/// Supervised loss: BCE over present binary targets or mean CE.
Var supervised_loss(Tape& tape, LossKind kind, Var logits, const BatchTargets& targets);

/// Output-pair loss between two logit matrices of equal shape.
///  - l1_output:    mean |sigmoid(a) - sigmoid(b)| (softmax for multiclass)
///  - kl_pointwise: mean over rows of KL(p_a || p_b); for sigmoid outputs
///                  each column is a Bernoulli PMF {p, 1 - p}.
Var output_loss(Tape& tape, LossKind kind, Var logits_a, Var logits_b, bool multiclass);

}  // namespace qgnn
