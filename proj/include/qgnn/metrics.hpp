#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qgnn/graph.hpp"
#include "qgnn/model.hpp"

namespace qgnn {

enum class MetricKind { auroc, ap, acc };

MetricKind parse_metric(const std::string& text);
const char* to_string(MetricKind kind);

struct EvalResult {
  MetricKind metric_kind = MetricKind::acc;
  double value = 0.0;
  std::vector<double> per_task_values;  // tasks with a defined metric
  std::vector<int> evaluated_tasks;
  std::size_t n_evaluated = 0;
};

/// Mann-Whitney AUROC with average ranks for ties. Throws MetricUndefined
/// unless both classes occur.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Step-wise AP over the descending-score sweep; equal scores keep their
/// input order (stable sort). Throws MetricUndefined without positives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Row argmax, lowest index on ties.
int argmax_row(std::span<const double> row);

/// Metric from precomputed logits. Binary tasks score sigmoid(logit) per task
/// over present targets (ACC thresholds at logit > 0) and average over tasks
/// with a defined metric; multiclass supports ACC only.
EvalResult evaluate_logits(const Tensor& logits, const Dataset& dataset, MetricKind kind);

/// Single forward pass over the whole dataset.
EvalResult evaluate_model(const ModelParams& model, const Dataset& dataset, MetricKind kind);

/// Chance-level predicate: AUROC <= 0.5, ACC <= 1/num_classes + 0.02,
/// AP <= positive_rate + 0.02. AP requires positive_rate.
bool is_random_output(const EvalResult& result, TaskKind task_kind, int num_classes,
                      std::optional<double> positive_rate = std::nullopt);

/// Fraction of present binary targets that are positive.
double positive_rate(const Dataset& dataset);

}  // namespace qgnn
