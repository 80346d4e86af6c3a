#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qgnn/graph.hpp"
#include "qgnn/loss.hpp"
#include "qgnn/metrics.hpp"
#include "qgnn/model.hpp"
#include "qgnn/pbs.hpp"

namespace qgnn {

enum class AttackKind { rbfa, pbfa, ibfa1, ibfa2 };

AttackKind parse_attack(const std::string& text);
const char* to_string(AttackKind kind);

struct AttackConfig {
  AttackKind attack = AttackKind::ibfa1;
  int attack_runs = 5;
  std::size_t candidates_per_layer = 10;
  int max_combination_size = 2;
  std::size_t batch_size = 32;
  LossKind loss = LossKind::l1_output;
  double pool_fraction = 1.0;
  std::uint64_t seed = 0;
  /// PBFA: draw a fresh batch before every run instead of fixing one.
  bool resample_batch = false;
  /// RBFA flip count; attack_runs when unset.
  std::optional<std::size_t> rbfa_flips;
  /// Stop once the total flip count reaches this value (0 = unlimited).
  std::size_t max_total_flips = 0;
  /// Stop after the first run whose test metric satisfies is_random_output.
  bool stop_on_random_output = false;
  bool parallel = true;

  /// Throws ParameterError for inconsistent attack/loss combinations.
  void validate() const;
};

/// Data an attack reads: the attacker's pool (training split) and the split
/// on which degradation is measured.
struct AttackContext {
  const Dataset* attack_data = nullptr;
  const Dataset* test = nullptr;
  MetricKind metric = MetricKind::acc;
};

struct FlipRecord {
  std::string tensor;
  std::size_t element = 0;
  int bit = 0;
  int code_before = 0;
  int code_after = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  int run = 0;
  friend bool operator==(const FlipRecord&, const FlipRecord&) = default;
};

struct CurvePoint {
  std::size_t flip_count = 0;
  double metric = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct PairSelection {
  int run = 0;
  std::size_t batch_a = 0;
  std::size_t batch_b = 0;
  double objective = 0.0;
  std::vector<std::size_t> graphs_a;
  std::vector<std::size_t> graphs_b;
  friend bool operator==(const PairSelection&, const PairSelection&) = default;
};

struct AttackReport {
  AttackKind attack = AttackKind::rbfa;
  int attack_runs = 0;
  int runs_completed = 0;
  bool stalled = false;
  MetricKind metric_kind = MetricKind::acc;
  double clean_metric = 0.0;
  double final_metric = 0.0;
  bool random_output = false;
  std::vector<FlipRecord> flips;
  std::size_t total_bit_flips = 0;
  std::vector<CurvePoint> metric_curve;
  std::map<std::string, std::size_t> per_tensor_flip_counts;
  std::vector<PairSelection> selected_pairs;
  friend bool operator==(const AttackReport&, const AttackReport&) = default;
};

struct AttackOutcome {
  AttackReport report;
  ModelParams model;
};

/// Test-split metric and chance predicate for a model.
struct MetricProbe {
  EvalResult result;
  bool random_output = false;
};
MetricProbe probe_metric(const ModelParams& model, const AttackContext& ctx);

/// Loss-maximizing progressive bit search on one seeded training batch.
AttackOutcome pbfa(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg);

/// Injectivity attack: minimizes the output-pair loss between the pool
/// batches that differ most under the current model. IBFA1 selects the pair
/// once, IBFA2 before every run. Targets are never read.
AttackOutcome ibfa(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg);

/// Uniformly random distinct bit addresses over all weight tensors.
AttackOutcome rbfa(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg);

AttackOutcome run_attack(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg);

/// Seeded partition of pool indices [0, pool_size) into full batches; the
/// incomplete tail is dropped. Throws ParameterError for fewer than two.
std::vector<std::vector<std::size_t>> make_pool_batches(std::size_t pool_size, std::size_t batch_size,
                                                        std::uint64_t seed);

/// Ordered pair of distinct batches maximizing the output-pair loss under
/// `model` (first maximum in (a, b) order). Per-batch outputs are computed
/// once and reused for all pairs.
PairSelection select_input_pair(const ModelParams& model, const Dataset& pool,
                                const std::vector<std::vector<std::size_t>>& batches, LossKind loss,
                                bool parallel = true);

/// Re-applies a flip log, checking every recorded code_before.
void apply_flip_log(ModelParams& model, const std::vector<FlipRecord>& flips);

struct EscalationConfig {
  int initial_runs = 5;
  int max_runs = 50;
};

struct EscalationResult {
  int attack_runs = 0;
  bool reached_random_output = false;
  std::vector<int> tried_runs;
  std::vector<AttackReport> reports;
};

/// Runs every attack from the clean model at the same attack_runs, starting
/// at initial_runs and incrementing until some attack reaches chance-level
/// output or max_runs is exhausted. RBFA, when present, flips as many bits
/// as the most flipping non-random attack of the same round.
EscalationResult escalation_protocol(const ModelParams& clean, const AttackContext& ctx,
                                     const std::vector<AttackConfig>& attacks,
                                     const EscalationConfig& config);

/// First flip count on the curve whose metric is at chance level, if any.
std::optional<std::size_t> flips_to_random_output(const AttackReport& report, const Dataset& test);

}  // namespace qgnn
