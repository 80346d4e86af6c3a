#pragma once

#include <cstdint>
#include <vector>

#include "qgnn/graph.hpp"
#include "qgnn/loss.hpp"
#include "qgnn/metrics.hpp"
#include "qgnn/model.hpp"

namespace qgnn {

struct TrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  MetricKind metric = MetricKind::acc;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_metric = 0.0;
  double valid_metric = 0.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<EpochRecord> history;
};

/// Quantization-aware training with Adam.
///
/// Full-precision shadow weights are initialized from the dequantized model
/// and every forward pass uses dequantize(quantize(shadow)) under the scales
/// the model arrived with (frozen). Gradients reach the shadow weights
/// through the clipped straight-through estimator; biases train in full
/// precision. Loss is masked BCE for binary data and CE for multiclass.
/// Throws TrainingError on a non-finite loss.
TrainResult train_quantized(const ModelParams& model, const Dataset& train, const Dataset& valid,
                            const TrainConfig& config);

}  // namespace qgnn
