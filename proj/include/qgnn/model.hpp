#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qgnn/graph.hpp"
#include "qgnn/quant.hpp"
#include "qgnn/tape.hpp"

namespace qgnn {

enum class Architecture { gin, gcn };

Architecture parse_architecture(const std::string& text);
const char* to_string(Architecture arch);

struct ModelConfig {
  Architecture architecture = Architecture::gin;
  int num_layers = 5;
  int hidden_dim = 64;
  int input_dim = 1;
  int output_dim = 1;
  int mlp_depth = 2;
  double epsilon = 0.0;
  bool virtual_node = false;
  std::uint64_t seed = 0;

  void validate() const;
  /// Width of the concatenated readout: input_dim + num_layers * hidden_dim.
  int readout_dim() const { return input_dim + num_layers * hidden_dim; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NamedWeight {
  std::string name;
  QuantizedTensor q;
  friend bool operator==(const NamedWeight&, const NamedWeight&) = default;
};

struct NamedBias {
  std::string name;
  Tensor value;  // 1 x cols
  friend bool operator==(const NamedBias&, const NamedBias&) = default;
};

/// Deployed model: INT8 weights (the attack surface) and full-precision biases.
struct ModelParams {
  ModelConfig config;
  std::vector<NamedWeight> weights;
  std::vector<NamedBias> biases;

  std::size_t attackable_bits() const;
  std::size_t weight_index(const std::string& name) const;
  std::size_t bias_index(const std::string& name) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// One entry of the parameter layout implied by a config.
struct ParamShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_weight = true;
};

/// Ordered parameter layout. Weights are "<prefix>.weight" (fan_in x fan_out),
/// biases "<prefix>.bias" (1 x fan_out). GIN layer k has an MLP
/// "layer<k>.mlp.<j>", GCN layer k a single bias-free "layer<k>.linear", the
/// optional virtual node "layer<k>.vn_mlp.<j>" for k < num_layers, and both
/// share the linear head "head".
std::vector<ParamShape> parameter_layout(const ModelConfig& config);

/// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn from
/// Rng(config.seed) in layout order, weights then quantized with their own
/// symmetric scale.
ModelParams init_model(const ModelConfig& config);

/// Disjoint union of graphs with one-hot node features.
struct GraphBatch {
  Tensor node_features;           // total_nodes x input_dim
  std::vector<int> edge_src;      // both directions materialized
  std::vector<int> edge_dst;
  std::vector<int> node_graph;    // node -> graph, ascending
  std::vector<double> inv_closed_degree;  // 1 / (deg + 1), for GCN
  std::size_t num_graphs = 0;
  std::size_t num_nodes() const { return node_graph.size(); }
};

GraphBatch make_batch(std::span<const LabeledGraph> graphs, int input_dim);
GraphBatch make_batch(const Dataset& dataset, std::span<const std::size_t> indices, int input_dim);

/// Tape handles for every parameter, in ModelParams order.
struct ModelBinding {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

/// Records dequantized weights as parameter leaves keyed by weight index and
/// biases as constants.
ModelBinding bind_model(Tape& tape, const ModelParams& model);

/// Logits (num_graphs x output_dim) for the bound parameters.
Var gin_forward(Tape& tape, const ModelConfig& config, const ModelBinding& p, const GraphBatch& batch);
Var gcn_forward(Tape& tape, const ModelConfig& config, const ModelBinding& p, const GraphBatch& batch);
Var model_forward(Tape& tape, const ModelConfig& config, const ModelBinding& p, const GraphBatch& batch);

/// Graph-level readout (num_graphs x readout_dim) before the head.
Var readout(Tape& tape, const ModelConfig& config, const ModelBinding& p, const GraphBatch& batch);

/// Forward pass of a deployed model on its own tape.
Tensor predict(const ModelParams& model, const GraphBatch& batch);

/// Versioned container: plain-text config header, then per weight its shape,
/// scale (17 significant digits) and raw code bytes, then per bias its shape
/// and raw little-endian IEEE-754 doubles.
void save_checkpoint(const ModelParams& model, const std::filesystem::path& path);
std::string serialize_checkpoint(const ModelParams& model);

/// Throws FormatError naming the byte offset of the first problem.
ModelParams load_checkpoint(const std::filesystem::path& path);
ModelParams parse_checkpoint(const std::string& bytes);

}  // namespace qgnn
