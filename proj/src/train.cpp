#include "qgnn/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "qgnn/errors.hpp"
#include "qgnn/rng.hpp"

namespace qgnn {

namespace {

struct Adam {
  std::vector<Tensor> m, v;
  int t = 0;

  explicit Adam(const std::vector<Tensor>& params) {
    for (const auto& p : params) {
      m.emplace_back(p.rows(), p.cols());
      v.emplace_back(p.rows(), p.cols());
    }
  }

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, const TrainConfig& c) {
    ++t;
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t e = 0; e < params[i].size(); ++e) {
        const double g = grads[i][e];
        m[i][e] = c.beta1 * m[i][e] + (1.0 - c.beta1) * g;
        v[i][e] = c.beta2 * v[i][e] + (1.0 - c.beta2) * g * g;
        params[i][e] -= c.lr * (m[i][e] / bc1) / (std::sqrt(v[i][e] / bc2) + c.adam_eps);
      }
    }
  }
};

double metric_or_nan(const ModelParams& model, const Dataset& ds, MetricKind kind) {
  try {
    return evaluate_model(model, ds, kind).value;
  } catch (const MetricUndefined&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

TrainResult train_quantized(const ModelParams& model, const Dataset& train, const Dataset& valid,
                            const TrainConfig& config) {
  if (train.empty() || valid.empty()) throw ParameterError("training and validation sets must be nonempty");
  if (config.batch_size == 0) throw ParameterError("batch_size must be positive");
  if (config.epochs < 0) throw ParameterError("epochs must be non-negative");
  if (!(config.lr >= 0.0)) throw ParameterError("learning rate must be non-negative");
  if (model.config.output_dim != train.output_dim()) throw DimensionError("model output_dim does not match the data");
  if (model.config.input_dim < train.label_alphabet_size) throw DimensionError("model input_dim below the label alphabet");

  const std::size_t nw = model.weights.size();
  std::vector<Tensor> shadow;
  std::vector<double> scales;
  for (const auto& w : model.weights) {
    shadow.push_back(dequantize(w.q));
    scales.push_back(w.q.scale);
  }
  for (const auto& b : model.biases) shadow.push_back(b.value);
  Adam adam(shadow);

  TrainResult result;
  result.model = model;
  auto sync = [&] {
    for (std::size_t i = 0; i < nw; ++i) result.model.weights[i].q = quantize_with_scale(shadow[i], scales[i]);
    for (std::size_t j = 0; j < model.biases.size(); ++j) result.model.biases[j].value = shadow[nw + j];
  };

  const LossKind loss_kind = train.task_kind == TaskKind::multiclass ? LossKind::ce : LossKind::bce_masked;
  Rng rng(derive_seed(config.seed, 0x7EA1));
  std::vector<Tensor> grads(shadow.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto order = rng.permutation(train.size());
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, order.size() - start));
      const auto batch = make_batch(train, idx, model.config.input_dim);
      const auto targets = batch_targets(train, idx);

      Tape tape;
      ModelBinding p;
      for (std::size_t i = 0; i < nw; ++i) {
        p.weights.push_back(tape.parameter(dequantize(quantize_with_scale(shadow[i], scales[i])), static_cast<int>(i)));
      }
      for (std::size_t j = nw; j < shadow.size(); ++j) p.biases.push_back(tape.parameter(shadow[j], static_cast<int>(j)));
      const Var loss = supervised_loss(tape, loss_kind, model_forward(tape, model.config, p, batch), targets);
      const double lv = tape.value(loss)[0];
      if (!std::isfinite(lv)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      loss_sum += lv * static_cast<double>(idx.size());
      seen += idx.size();

      const auto g = tape.backward(loss);
      for (std::size_t i = 0; i < nw; ++i) {
        grads[i] = ste_backward(g.param(static_cast<int>(i)), shadow[i], model.weights[i].q.clip_lo * scales[i],
                                model.weights[i].q.clip_hi * scales[i]);
      }
      for (std::size_t j = nw; j < shadow.size(); ++j) grads[j] = g.param(static_cast<int>(j));
      adam.step(shadow, grads, config);
    }
    sync();
    result.history.push_back({epoch, loss_sum / static_cast<double>(seen), metric_or_nan(result.model, train, config.metric),
                              metric_or_nan(result.model, valid, config.metric)});
  }
  sync();
  return result;
}

}  // namespace qgnn
