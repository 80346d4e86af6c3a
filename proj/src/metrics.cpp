#include "qgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qgnn/errors.hpp"

namespace qgnn {

MetricKind parse_metric(const std::string& text) {
  if (text == "auroc") return MetricKind::auroc;
  if (text == "ap") return MetricKind::ap;
  if (text == "acc") return MetricKind::acc;
  throw ParameterError("unknown metric '" + text + "' (expected auroc, ap or acc)");
}

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::auroc: return "auroc";
    case MetricKind::ap: return "ap";
    case MetricKind::acc: return "acc";
  }
  return "?";
}

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionError("scores and labels differ in length");
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_aligned(scores.size(), labels.size());
  const auto n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] != 0) {
        pos_rank_sum += avg_rank;
        ++npos;
      }
    }
    i = j;
  }
  const std::size_t nneg = n - npos;
  if (npos == 0 || nneg == 0) throw MetricUndefined("AUROC needs both positive and negative labels");
  const double p = static_cast<double>(npos);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(nneg));
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_aligned(scores.size(), labels.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const auto total_pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  if (total_pos == 0) throw MetricUndefined("AP needs at least one positive label");
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (labels[order[i]] == 0) continue;
    ++tp;
    ap += static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  return ap / static_cast<double>(total_pos);
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_aligned(predictions.size(), labels.size());
  if (predictions.empty()) throw MetricUndefined("accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

int argmax_row(std::span<const double> row) {
  if (row.empty()) throw DimensionError("argmax of an empty row");
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

EvalResult evaluate_logits(const Tensor& logits, const Dataset& dataset, MetricKind kind) {
  if (dataset.empty()) throw ParameterError("cannot evaluate an empty dataset");
  if (logits.rows() != dataset.size() || logits.cols() != static_cast<std::size_t>(dataset.output_dim())) {
    throw DimensionError("logits shape does not match the dataset");
  }
  EvalResult res;
  res.metric_kind = kind;

  if (dataset.task_kind == TaskKind::multiclass) {
    if (kind != MetricKind::acc) throw ParameterError("multiclass data supports ACC only");
    std::vector<int> pred(dataset.size());
    for (std::size_t g = 0; g < dataset.size(); ++g) pred[g] = argmax_row(logits.row_view(g));
    res.value = accuracy(pred, dataset.class_targets);
    res.per_task_values = {res.value};
    res.evaluated_tasks = {0};
    res.n_evaluated = dataset.size();
    return res;
  }

  for (int t = 0; t < dataset.num_tasks; ++t) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t g = 0; g < dataset.size(); ++g) {
      const auto b = dataset.binary_target(g, t);
      if (b == BinaryTarget::missing) continue;
      scores.push_back(logits(g, static_cast<std::size_t>(t)));
      labels.push_back(b == BinaryTarget::positive ? 1 : 0);
    }
    if (labels.empty()) continue;
    double v = 0.0;
    try {
      if (kind == MetricKind::acc) {
        std::vector<int> pred(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > 0.0 ? 1 : 0;
        v = accuracy(pred, labels);
      } else {
        for (auto& s : scores) s = 1.0 / (1.0 + std::exp(-s));
        v = kind == MetricKind::auroc ? auroc(scores, labels) : average_precision(scores, labels);
      }
    } catch (const MetricUndefined&) {
      continue;
    }
    res.per_task_values.push_back(v);
    res.evaluated_tasks.push_back(t);
    res.n_evaluated += labels.size();
  }
  if (res.per_task_values.empty()) {
    throw MetricUndefined(std::string(to_string(kind)) + " is undefined on every task");
  }
  res.value = std::accumulate(res.per_task_values.begin(), res.per_task_values.end(), 0.0) /
              static_cast<double>(res.per_task_values.size());
  return res;
}

EvalResult evaluate_model(const ModelParams& model, const Dataset& dataset, MetricKind kind) {
  if (dataset.empty()) throw ParameterError("cannot evaluate an empty dataset");
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), 0);
  const auto batch = make_batch(dataset, all, model.config.input_dim);
  return evaluate_logits(predict(model, batch), dataset, kind);
}

bool is_random_output(const EvalResult& result, TaskKind task_kind, int num_classes,
                      std::optional<double> positive_rate) {
  constexpr double margin = 0.02;
  constexpr double slack = 1e-12;
  switch (result.metric_kind) {
    case MetricKind::auroc:
      return result.value <= 0.5 + slack;
    case MetricKind::acc: {
      const int classes = task_kind == TaskKind::multiclass ? num_classes : 2;
      if (classes < 2) throw ParameterError("chance accuracy needs at least two classes");
      return result.value <= 1.0 / classes + margin + slack;
    }
    case MetricKind::ap:
      if (!positive_rate) throw ParameterError("AP chance level needs the positive rate");
      return result.value <= *positive_rate + margin + slack;
  }
  return false;
}

double positive_rate(const Dataset& dataset) {
  if (dataset.task_kind == TaskKind::multiclass) throw ParameterError("positive rate of multiclass data");
  std::size_t present = 0, pos = 0;
  for (auto b : dataset.binary_targets) {
    if (b == BinaryTarget::missing) continue;
    ++present;
    pos += b == BinaryTarget::positive;
  }
  if (present == 0) throw MetricUndefined("no present targets");
  return static_cast<double>(pos) / static_cast<double>(present);
}

}  // namespace qgnn
