#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qgnn/tensor.hpp"

namespace qgnn {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape;

/// Gradients of a scalar with respect to every recorded node.
class Gradients {
 public:
  /// Gradient of a node; zero tensor of the node's shape when it did not
  /// influence the loss.
  const Tensor& of(Var v) const;

  /// Gradient of the parameter registered under `key`.
  const Tensor& param(int key) const;

  bool has_param(int key) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<int> param_node_;  // key -> node id, -1 if unused
};

/// Single-writer recording of primitive applications for reverse-mode
/// differentiation. Nodes are appended in evaluation order, which is a
/// topological order by construction.
class Tape {
 public:
  Var constant(Tensor value);
  /// Leaf whose gradient is exposed under `key` (keys need not be dense).
  Var parameter(Tensor value, int key);

  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                  // elementwise
  Var scale(Var x, double c);
  Var add_scalar(Var x, double c);
  Var add_bias_rowwise(Var x, Var bias);  // bias is 1 x cols
  Var scale_rows(Var x, std::vector<double> row_factors);
  Var relu(Var x);                        // d/dx at 0 is 0
  Var sigmoid(Var x);
  Var abs(Var x);                         // d/dx at 0 is 0
  Var log(Var x);
  Var clamp(Var x, double lo, double hi); // zero gradient where clamped
  Var softmax_rowwise(Var x);
  Var log_softmax_rowwise(Var x);
  Var concat_cols(std::span<const Var> parts);
  Var segment_sum(Var x, std::vector<int> segment_ids, std::size_t num_segments);
  Var gather_rows(Var x, std::vector<int> index);
  Var sum_all(Var x);
  Var mean_all(Var x);

  /// Mean over entries with mask 1 of the numerically stable binary
  /// cross-entropy max(z,0) - z*y + log(1 + exp(-|z|)). Targets and mask are
  /// constants of the logits' shape; at least one mask entry must be set.
  Var bce_with_logits_masked(Var logits, Tensor targets, Tensor mask);

  /// Mean over rows of -logp[r, target[r]].
  Var nll_mean(Var log_probs, std::vector<int> targets);

  /// Reverse sweep from a 1x1 node. Throws ContractError otherwise.
  Gradients backward(Var loss) const;

 private:
  enum class Op {
    leaf, matmul, add, sub, mul, scale, add_scalar, add_bias, scale_rows, relu, sigmoid, abs, log,
    clamp, softmax, log_softmax, concat, segment_sum, gather, sum_all, mean_all, bce, nll
  };

  struct Node {
    Op op = Op::leaf;
    Tensor value;
    std::vector<int> inputs;
    double c0 = 0.0;
    double c1 = 0.0;
    std::vector<int> ints;       // segment ids / gather index / nll targets
    std::vector<double> reals;   // row factors
    Tensor aux0;                 // bce targets
    Tensor aux1;                 // bce mask
    std::size_t count = 0;       // segments / mask count
    int key = -1;
  };

  Var push(Node node);
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

  std::vector<Node> nodes_;
};

/// Scalar objective built on a fresh tape from parameter leaves.
using TapeFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Floor of the relative-error denominator. Central differences in double
/// precision cannot resolve gradients much below ulp(f) / epsilon, so entries
/// smaller than this are compared in absolute terms.
inline constexpr double kGradientFloor = 1e-6;

/// Central-difference check of Tape::backward for f at `params`. Returns the
/// maximum over all parameter entries of |analytic - numeric| /
/// max(|analytic|, |numeric|, kGradientFloor).
double finite_diff_check(const TapeFunction& f, std::span<const Tensor> params, double epsilon);

}  // namespace qgnn
