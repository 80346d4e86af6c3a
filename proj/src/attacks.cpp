#include "qgnn/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>

#include "qgnn/errors.hpp"
#include "qgnn/rng.hpp"

namespace qgnn {

AttackKind parse_attack(const std::string& text) {
  if (text == "rbfa") return AttackKind::rbfa;
  if (text == "pbfa") return AttackKind::pbfa;
  if (text == "ibfa1") return AttackKind::ibfa1;
  if (text == "ibfa2") return AttackKind::ibfa2;
  throw ParameterError("unknown attack '" + text + "' (expected rbfa, pbfa, ibfa1 or ibfa2)");
}

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::rbfa: return "rbfa";
    case AttackKind::pbfa: return "pbfa";
    case AttackKind::ibfa1: return "ibfa1";
    case AttackKind::ibfa2: return "ibfa2";
  }
  return "?";
}

void AttackConfig::validate() const {
  if (attack_runs < 0) throw ParameterError("attack_runs must be non-negative");
  if (candidates_per_layer == 0) throw ParameterError("candidates_per_layer must be positive");
  if (max_combination_size < 1) throw ParameterError("max_combination_size must be at least 1");
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (!(pool_fraction > 0.0 && pool_fraction <= 1.0)) throw ParameterError("pool_fraction must lie in (0, 1]");
  if ((attack == AttackKind::ibfa1 || attack == AttackKind::ibfa2) && !is_output_loss(loss)) {
    throw ParameterError("IBFA needs an output-pair loss (l1 or kl)");
  }
  if (attack == AttackKind::pbfa && is_output_loss(loss)) throw ParameterError("PBFA needs a supervised loss (bce or ce)");
}

MetricProbe probe_metric(const ModelParams& model, const AttackContext& ctx) {
  if (!ctx.test) throw ParameterError("attack context has no test split");
  MetricProbe p;
  p.result = evaluate_model(model, *ctx.test, ctx.metric);
  std::optional<double> prevalence;
  if (ctx.metric == MetricKind::ap) prevalence = positive_rate(*ctx.test);
  p.random_output = is_random_output(p.result, ctx.test->task_kind, ctx.test->num_classes, prevalence);
  return p;
}

namespace {

constexpr std::uint64_t kPbfaBatchTag = 0xBFA0;
constexpr std::uint64_t kPoolTag = 0x1BFA;
constexpr std::uint64_t kPoolBatchTag = 0x1BFB;
constexpr std::uint64_t kRbfaTag = 0x2BFA;
constexpr double kDegeneratePair = 1e-9;

const Dataset& attack_data(const AttackContext& ctx) {
  if (!ctx.attack_data || ctx.attack_data->empty()) throw ParameterError("attack context has no attack data");
  return *ctx.attack_data;
}

AttackReport start_report(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg) {
  AttackReport r;
  r.attack = cfg.attack;
  r.attack_runs = cfg.attack_runs;
  r.metric_kind = ctx.metric;
  const auto probe = probe_metric(clean, ctx);
  r.clean_metric = probe.result.value;
  r.final_metric = probe.result.value;
  r.random_output = probe.random_output;
  r.metric_curve.push_back({0, probe.result.value});
  return r;
}

// Records applied flips on top of `before` and refreshes the metric; returns
// true once the caller should stop on chance-level output.
bool log_run(AttackReport& r, const ModelParams& before, const ModelParams& after, const std::vector<BitRef>& flips,
             double obj_before, double obj_after, int run, const AttackContext& ctx, const AttackConfig& cfg) {
  ModelParams replay = before;
  for (const auto& f : flips) {
    FlipRecord rec;
    rec.tensor = replay.weights[f.tensor].name;
    rec.element = f.element;
    rec.bit = f.bit;
    rec.code_before = replay.weights[f.tensor].q.codes[f.element];
    apply_flip(replay, f);
    rec.code_after = replay.weights[f.tensor].q.codes[f.element];
    rec.objective_before = obj_before;
    rec.objective_after = obj_after;
    rec.run = run;
    r.flips.push_back(rec);
    ++r.per_tensor_flip_counts[rec.tensor];
  }
  if (!(replay == after)) throw ContractError("flip log does not reproduce the attacked model");
  r.total_bit_flips += flips.size();
  r.runs_completed = run + 1;
  const auto probe = probe_metric(after, ctx);
  r.metric_curve.push_back({r.total_bit_flips, probe.result.value});
  r.final_metric = probe.result.value;
  r.random_output = probe.random_output;
  return cfg.stop_on_random_output && probe.random_output;
}

bool budget_spent(const AttackReport& r, const AttackConfig& cfg) {
  return cfg.max_total_flips > 0 && r.total_bit_flips >= cfg.max_total_flips;
}

PbsOptions pbs_options(const AttackConfig& cfg) {
  return {cfg.candidates_per_layer, cfg.max_combination_size, cfg.parallel};
}

std::vector<std::size_t> seeded_batch(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  Rng rng(seed);
  const auto picks = rng.sample_distinct(n, std::min<std::size_t>(batch_size, n));
  return {picks.begin(), picks.end()};
}

Objective pair_objective(const GraphBatch& a, const GraphBatch& b, LossKind loss, bool multiclass) {
  return [a, b, loss, multiclass](Tape& tape, const ModelParams& m) {
    const auto p = bind_model(tape, m);
    const Var la = model_forward(tape, m.config, p, a);
    const Var lb = model_forward(tape, m.config, p, b);
    return output_loss(tape, loss, la, lb, multiclass);
  };
}

}  // namespace

AttackOutcome pbfa(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.attack != AttackKind::pbfa) throw ParameterError("pbfa called with a different attack kind");
  const Dataset& data = attack_data(ctx);
  AttackOutcome out{start_report(clean, ctx, cfg), clean};

  auto make_objective = [&](std::uint64_t seed) -> Objective {
    const auto idx = seeded_batch(data.size(), cfg.batch_size, seed);
    auto batch = make_batch(data, idx, clean.config.input_dim);
    auto targets = batch_targets(data, idx);
    return [batch = std::move(batch), targets = std::move(targets), loss = cfg.loss](Tape& tape, const ModelParams& m) {
      const auto p = bind_model(tape, m);
      return supervised_loss(tape, loss, model_forward(tape, m.config, p, batch), targets);
    };
  };

  Objective objective = make_objective(derive_seed(cfg.seed, kPbfaBatchTag));
  for (int run = 0; run < cfg.attack_runs && !budget_spent(out.report, cfg); ++run) {
    if (cfg.resample_batch && run > 0) {
      objective = make_objective(derive_seed(derive_seed(cfg.seed, kPbfaBatchTag), static_cast<std::uint64_t>(run)));
    }
    const ModelParams before = out.model;
    const auto step = pbs_iteration(out.model, objective, Direction::ascend, pbs_options(cfg));
    if (step.stalled) {
      out.report.stalled = true;
      break;
    }
    if (log_run(out.report, before, out.model, step.flips, step.objective_before, step.objective_after, run, ctx, cfg)) break;
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_pool_batches(std::size_t pool_size, std::size_t batch_size,
                                                        std::uint64_t seed) {
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  const std::size_t full = pool_size / batch_size;
  if (full < 2) {
    throw ParameterError("pool of " + std::to_string(pool_size) + " graphs holds fewer than two batches of " +
                         std::to_string(batch_size));
  }
  Rng rng(seed);
  const auto perm = rng.permutation(pool_size);
  std::vector<std::vector<std::size_t>> out(full);
  for (std::size_t b = 0; b < full; ++b) {
    out[b].assign(perm.begin() + static_cast<std::ptrdiff_t>(b * batch_size),
                  perm.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size));
  }
  return out;
}

PairSelection select_input_pair(const ModelParams& model, const Dataset& pool,
                                const std::vector<std::vector<std::size_t>>& batches, LossKind loss, bool parallel) {
  if (batches.size() < 2) throw ParameterError("pair selection needs at least two batches");
  if (!is_output_loss(loss)) throw ParameterError("pair selection needs an output-pair loss");
  const bool multiclass = pool.task_kind == TaskKind::multiclass;
  const auto nb = static_cast<std::ptrdiff_t>(batches.size());

  std::vector<Tensor> outputs(batches.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (parallel && nb > 1)
  for (std::ptrdiff_t i = 0; i < nb; ++i) {
    try {
      const auto& idx = batches[static_cast<std::size_t>(i)];
      outputs[static_cast<std::size_t>(i)] = predict(model, make_batch(pool, idx, model.config.input_dim));
    } catch (...) {
#pragma omp critical(qgnn_pair_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  PairSelection best;
  bool found = false;
  for (std::size_t a = 0; a < batches.size(); ++a) {
    for (std::size_t b = 0; b < batches.size(); ++b) {
      if (a == b) continue;
      Tape tape;
      const double v =
          tape.value(output_loss(tape, loss, tape.constant(outputs[a]), tape.constant(outputs[b]), multiclass))[0];
      if (!found || v > best.objective) {
        found = true;
        best.batch_a = a;
        best.batch_b = b;
        best.objective = v;
      }
    }
  }
  best.graphs_a = batches[best.batch_a];
  best.graphs_b = batches[best.batch_b];
  return best;
}

AttackOutcome ibfa(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.attack != AttackKind::ibfa1 && cfg.attack != AttackKind::ibfa2) {
    throw ParameterError("ibfa called with a different attack kind");
  }
  const Dataset& data = attack_data(ctx);
  std::vector<std::size_t> pool_idx;
  if (cfg.pool_fraction < 1.0) {
    const auto want = static_cast<std::size_t>(std::ceil(cfg.pool_fraction * static_cast<double>(data.size())));
    Rng rng(derive_seed(cfg.seed, kPoolTag));
    const auto picks = rng.sample_distinct(data.size(), std::max<std::size_t>(want, 1));
    pool_idx.assign(picks.begin(), picks.end());
    std::sort(pool_idx.begin(), pool_idx.end());
  } else {
    pool_idx.resize(data.size());
    for (std::size_t i = 0; i < pool_idx.size(); ++i) pool_idx[i] = i;
  }
  const Dataset pool = data.subset(pool_idx);
  const auto batches = make_pool_batches(pool.size(), cfg.batch_size, derive_seed(cfg.seed, kPoolBatchTag));
  const bool multiclass = pool.task_kind == TaskKind::multiclass;

  AttackOutcome out{start_report(clean, ctx, cfg), clean};
  Objective objective;
  double pair_objective_value = 0.0;
  auto select = [&](int run) {
    auto sel = select_input_pair(out.model, pool, batches, cfg.loss, cfg.parallel);
    sel.run = run;
    const auto ga = make_batch(pool, sel.graphs_a, clean.config.input_dim);
    const auto gb = make_batch(pool, sel.graphs_b, clean.config.input_dim);
    for (auto& g : sel.graphs_a) g = pool_idx[g];
    for (auto& g : sel.graphs_b) g = pool_idx[g];
    pair_objective_value = sel.objective;
    objective = pair_objective(ga, gb, cfg.loss, multiclass);
    out.report.selected_pairs.push_back(std::move(sel));
  };

  for (int run = 0; run < cfg.attack_runs && !budget_spent(out.report, cfg); ++run) {
    if (run == 0 || cfg.attack == AttackKind::ibfa2) {
      select(run);
      if (pair_objective_value < kDegeneratePair) {
        out.report.stalled = true;
        break;
      }
    }
    const ModelParams before = out.model;
    const auto step = pbs_iteration(out.model, objective, Direction::descend, pbs_options(cfg));
    if (step.stalled) {
      out.report.stalled = true;
      break;
    }
    if (log_run(out.report, before, out.model, step.flips, step.objective_before, step.objective_after, run, ctx, cfg)) break;
  }
  return out;
}

AttackOutcome rbfa(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.rbfa_flips.value_or(static_cast<std::size_t>(cfg.attack_runs));
  const std::size_t total_bits = clean.attackable_bits();
  if (n > total_bits) {
    throw ParameterError("cannot flip " + std::to_string(n) + " of " + std::to_string(total_bits) + " bits");
  }
  std::vector<std::size_t> offsets{0};
  for (const auto& w : clean.weights) offsets.push_back(offsets.back() + w.q.size());

  AttackOutcome out{start_report(clean, ctx, cfg), clean};
  Rng rng(derive_seed(cfg.seed, kRbfaTag));
  const auto picks = rng.sample_distinct(total_bits, n);
  for (std::size_t i = 0; i < picks.size(); ++i) {
    if (budget_spent(out.report, cfg)) break;
    const std::size_t element = static_cast<std::size_t>(picks[i]) / kBitsPerCode;
    const auto t = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), element) - offsets.begin() - 1);
    const BitRef ref{t, element - offsets[t], static_cast<int>(picks[i] % kBitsPerCode)};
    const ModelParams before = out.model;
    apply_flip(out.model, ref);
    if (log_run(out.report, before, out.model, {ref}, 0.0, 0.0, static_cast<int>(i), ctx, cfg)) break;
  }
  return out;
}

AttackOutcome run_attack(const ModelParams& clean, const AttackContext& ctx, const AttackConfig& cfg) {
  switch (cfg.attack) {
    case AttackKind::rbfa: return rbfa(clean, ctx, cfg);
    case AttackKind::pbfa: return pbfa(clean, ctx, cfg);
    case AttackKind::ibfa1:
    case AttackKind::ibfa2: return ibfa(clean, ctx, cfg);
  }
  throw ParameterError("unknown attack kind");
}

void apply_flip_log(ModelParams& model, const std::vector<FlipRecord>& flips) {
  for (std::size_t i = 0; i < flips.size(); ++i) {
    const auto& f = flips[i];
    const auto t = model.weight_index(f.tensor);
    auto& q = model.weights[t].q;
    if (f.element >= q.size()) throw AddressError("flip " + std::to_string(i) + ": element out of range");
    if (q.codes[f.element] != f.code_before) {
      throw ConsistencyError("flip " + std::to_string(i) + ": code is " + std::to_string(q.codes[f.element]) +
                             ", log expects " + std::to_string(f.code_before));
    }
    flip_bit(q, f.element, f.bit);
    if (q.codes[f.element] != f.code_after) {
      throw ConsistencyError("flip " + std::to_string(i) + ": code after flip does not match the log");
    }
  }
}

EscalationResult escalation_protocol(const ModelParams& clean, const AttackContext& ctx,
                                     const std::vector<AttackConfig>& attacks, const EscalationConfig& config) {
  if (attacks.size() < 2) throw ParameterError("the escalation protocol compares at least two attacks");
  if (config.initial_runs < 1 || config.max_runs < config.initial_runs) {
    throw ParameterError("escalation needs 1 <= initial_runs <= max_runs");
  }
  EscalationResult res;
  for (int runs = config.initial_runs;; ++runs) {
    std::vector<AttackReport> reports(attacks.size());
    std::size_t most_flips = 0;
    bool any_guided = false;
    for (std::size_t i = 0; i < attacks.size(); ++i) {
      if (attacks[i].attack == AttackKind::rbfa) continue;
      auto cfg = attacks[i];
      cfg.attack_runs = runs;
      reports[i] = run_attack(clean, ctx, cfg).report;
      most_flips = std::max(most_flips, reports[i].total_bit_flips);
      any_guided = true;
    }
    for (std::size_t i = 0; i < attacks.size(); ++i) {
      if (attacks[i].attack != AttackKind::rbfa) continue;
      auto cfg = attacks[i];
      cfg.attack_runs = runs;
      cfg.rbfa_flips = any_guided ? most_flips : static_cast<std::size_t>(runs);
      reports[i] = run_attack(clean, ctx, cfg).report;
      reports[i].attack_runs = runs;
    }
    res.tried_runs.push_back(runs);
    res.attack_runs = runs;
    res.reports = std::move(reports);
    res.reached_random_output =
        std::any_of(res.reports.begin(), res.reports.end(), [](const AttackReport& r) { return r.random_output; });
    if (res.reached_random_output || runs >= config.max_runs) break;
  }
  return res;
}

std::optional<std::size_t> flips_to_random_output(const AttackReport& report, const Dataset& test) {
  std::optional<double> prevalence;
  if (report.metric_kind == MetricKind::ap) prevalence = positive_rate(test);
  for (const auto& p : report.metric_curve) {
    EvalResult r;
    r.metric_kind = report.metric_kind;
    r.value = p.metric;
    if (is_random_output(r, test.task_kind, test.num_classes, prevalence)) return p.flip_count;
  }
  return std::nullopt;
}

}  // namespace qgnn
