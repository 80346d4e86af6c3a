#include "qgnn/pbs.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>

#include "qgnn/errors.hpp"

namespace qgnn {

void apply_flip(ModelParams& model, const BitRef& ref) {
  if (ref.tensor >= model.weights.size()) throw AddressError("tensor index " + std::to_string(ref.tensor) + " out of range");
  flip_bit(model.weights[ref.tensor].q, ref.element, ref.bit);
}

double evaluate_objective(const Objective& objective, const ModelParams& model) {
  Tape tape;
  return tape.value(objective(tape, model))[0];
}

std::vector<Candidate> rank_candidates(const ModelParams& model, const Gradients& grads, Direction direction,
                                       std::size_t n_b) {
  const double sign = direction == Direction::ascend ? 1.0 : -1.0;
  auto by_strength = [](const Candidate& a, const Candidate& b) {
    const double fa = std::fabs(a.bit_grad), fb = std::fabs(b.bit_grad);
    if (fa != fb) return fa > fb;
    return a.ref < b.ref;
  };
  std::vector<Candidate> pooled;
  for (std::size_t t = 0; t < model.weights.size(); ++t) {
    if (!grads.has_param(static_cast<int>(t))) continue;
    const auto& q = model.weights[t].q;
    auto bg = bit_gradients(grads.param(static_cast<int>(t)), q);
    for (auto& row : bg) {
      for (auto& v : row) v *= sign;
    }
    const auto mask = ascending_flip_mask(q.codes, bg);
    std::vector<Candidate> local;
    for (std::size_t e = 0; e < q.size(); ++e) {
      for (int i = 0; i < kBitsPerCode; ++i) {
        if (mask[e] >> i & 1u) local.push_back({{t, e, i}, bg[e][static_cast<std::size_t>(i)]});
      }
    }
    const auto keep = std::min(n_b, local.size());
    std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end(), by_strength);
    pooled.insert(pooled.end(), local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(pooled.begin(), pooled.end(), by_strength);
  return pooled;
}

namespace {

double evaluate_one(ModelParams& scratch, const Objective& objective, const std::vector<BitRef>& set) {
  for (const auto& r : set) apply_flip(scratch, r);
  const double v = evaluate_objective(objective, scratch);
  for (const auto& r : set) apply_flip(scratch, r);
  return v;
}

}  // namespace

std::vector<double> evaluate_flip_sets_serial(const ModelParams& model, const Objective& objective,
                                              std::span<const std::vector<BitRef>> sets) {
  std::vector<double> out(sets.size());
  ModelParams scratch = model;
  for (std::size_t i = 0; i < sets.size(); ++i) out[i] = evaluate_one(scratch, objective, sets[i]);
  return out;
}

std::vector<double> evaluate_flip_sets(const ModelParams& model, const Objective& objective,
                                       std::span<const std::vector<BitRef>> sets) {
  std::vector<double> out(sets.size());
  std::exception_ptr error;
  const auto n = static_cast<std::ptrdiff_t>(sets.size());
#pragma omp parallel if (n > 1)
  {
    ModelParams scratch = model;
#pragma omp for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        out[static_cast<std::size_t>(i)] = evaluate_one(scratch, objective, sets[static_cast<std::size_t>(i)]);
      } catch (...) {
#pragma omp critical(qgnn_pbs_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

namespace {

// All k-subsets of [0, n) as ascending index tuples, lexicographic order.
std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k > n) return out;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    out.push_back(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

constexpr std::size_t kComboChunk = 64;

}  // namespace

PbsStep pbs_iteration(ModelParams& model, const Objective& objective, Direction direction, const PbsOptions& options) {
  if (options.candidates_per_tensor == 0) throw ParameterError("candidates_per_tensor must be positive");
  if (options.max_combination_size < 1) throw ParameterError("max_combination_size must be at least 1");

  PbsStep step;
  std::vector<Candidate> cands;
  {
    Tape tape;
    const Var obj = objective(tape, model);
    step.objective_before = tape.value(obj)[0];
    cands = rank_candidates(model, tape.backward(obj), direction, options.candidates_per_tensor);
  }
  step.objective_after = step.objective_before;
  auto gain = [&](double v) { return direction == Direction::ascend ? v - step.objective_before : step.objective_before - v; };
  auto evaluate = [&](std::span<const std::vector<BitRef>> sets) {
    return options.parallel ? evaluate_flip_sets(model, objective, sets) : evaluate_flip_sets_serial(model, objective, sets);
  };
  auto commit = [&](const std::vector<BitRef>& set, double value) {
    for (const auto& r : set) apply_flip(model, r);
    step.flips = set;
    step.objective_after = value;
    step.combination_size = static_cast<int>(set.size());
  };

  if (cands.empty()) {
    step.stalled = true;
    return step;
  }

  std::vector<std::vector<BitRef>> singles;
  for (const auto& c : cands) singles.push_back({c.ref});
  const auto values = evaluate(singles);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < singles.size(); ++i) {
    const double g = gain(values[i]);
    if (!(g > kStrictImprovement)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double gb = gain(values[*best]);
    if (g > gb || (g == gb && singles[i][0] < singles[*best][0])) best = i;
  }
  if (best) {
    commit(singles[*best], values[*best]);
    return step;
  }

  for (int size = 2; size <= options.max_combination_size; ++size) {
    auto combos = combinations(cands.size(), static_cast<std::size_t>(size));
    std::vector<double> strength(combos.size(), 0.0);
    for (std::size_t i = 0; i < combos.size(); ++i) {
      for (auto j : combos[i]) strength[i] += std::fabs(cands[j].bit_grad);
    }
    std::vector<std::size_t> order(combos.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return strength[a] > strength[b]; });

    for (std::size_t start = 0; start < order.size(); start += kComboChunk) {
      const auto end = std::min(order.size(), start + kComboChunk);
      std::vector<std::vector<BitRef>> sets;
      for (std::size_t i = start; i < end; ++i) {
        std::vector<BitRef> s;
        for (auto j : combos[order[i]]) s.push_back(cands[j].ref);
        sets.push_back(std::move(s));
      }
      const auto vals = evaluate(sets);
      for (std::size_t i = 0; i < sets.size(); ++i) {
        if (gain(vals[i]) > kStrictImprovement) {
          commit(sets[i], vals[i]);
          return step;
        }
      }
    }
  }
  step.stalled = true;
  return step;
}

}  // namespace qgnn
