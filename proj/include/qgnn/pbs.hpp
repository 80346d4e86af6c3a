#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qgnn/model.hpp"
#include "qgnn/tape.hpp"

namespace qgnn {

enum class Direction { ascend, descend };

/// One bit of one weight tensor, addressed by position in ModelParams.
struct BitRef {
  std::size_t tensor = 0;
  std::size_t element = 0;
  int bit = 0;
  friend bool operator==(const BitRef&, const BitRef&) = default;
  friend auto operator<=>(const BitRef&, const BitRef&) = default;
};

void apply_flip(ModelParams& model, const BitRef& ref);

/// Scalar objective over a deployed model. Implementations must obtain the
/// weights through bind_model so their gradients are keyed by weight index.
/// Must be safe to call concurrently on distinct models.
using Objective = std::function<Var(Tape&, const ModelParams&)>;

double evaluate_objective(const Objective& objective, const ModelParams& model);

struct Candidate {
  BitRef ref;
  double bit_grad = 0.0;  // signed, in the search direction
};

/// In-layer search: per weight tensor, bits whose flip follows the search
/// direction, ranked by |bit gradient| (ties by address), top n_b kept.
/// Returned in cross-layer order: |bit gradient| descending, then address.
std::vector<Candidate> rank_candidates(const ModelParams& model, const Gradients& grads,
                                       Direction direction, std::size_t n_b);

/// Objective value after applying each flip set to a copy of `model`.
/// Parallel over sets (OpenMP); the serial version is the reference.
std::vector<double> evaluate_flip_sets(const ModelParams& model, const Objective& objective,
                                       std::span<const std::vector<BitRef>> sets);
std::vector<double> evaluate_flip_sets_serial(const ModelParams& model, const Objective& objective,
                                              std::span<const std::vector<BitRef>> sets);

struct PbsOptions {
  std::size_t candidates_per_tensor = 10;
  int max_combination_size = 2;
  bool parallel = true;
};

/// Minimum objective change that counts as an improvement.
inline constexpr double kStrictImprovement = 1e-12;

struct PbsStep {
  std::vector<BitRef> flips;  // empty when stalled
  double objective_before = 0.0;
  double objective_after = 0.0;
  bool stalled = false;
  int combination_size = 0;   // 1 for a single flip
};

/// One progressive-bit-search iteration; mutates `model` only when a flip
/// set strictly improves the objective in `direction`.
///
/// Single candidates are all evaluated and the best one applied (ties go to
/// the smallest address). Otherwise combinations of size 2..max drawn from
/// the pooled candidates are tried in descending summed |bit gradient| order
/// (ties by lexicographic candidate rank) and the first improving one is
/// applied. If none improves, the step reports a stall.
PbsStep pbs_iteration(ModelParams& model, const Objective& objective, Direction direction,
                      const PbsOptions& options);

}  // namespace qgnn
