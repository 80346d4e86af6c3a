#include "qgnn/model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "qgnn/errors.hpp"
#include "qgnn/rng.hpp"

namespace qgnn {

Architecture parse_architecture(const std::string& text) {
  if (text == "gin") return Architecture::gin;
  if (text == "gcn") return Architecture::gcn;
  throw ParameterError("unknown architecture '" + text + "' (expected gin or gcn)");
}

const char* to_string(Architecture arch) { return arch == Architecture::gin ? "gin" : "gcn"; }

void ModelConfig::validate() const {
  if (num_layers < 1) throw ParameterError("num_layers must be positive");
  if (hidden_dim < 1) throw ParameterError("hidden_dim must be positive");
  if (input_dim < 1) throw ParameterError("input_dim must be positive");
  if (output_dim < 1) throw ParameterError("output_dim must be positive");
  if (mlp_depth < 1) throw ParameterError("mlp_depth must be positive");
  if (!std::isfinite(epsilon)) throw ParameterError("epsilon must be finite");
}

std::size_t ModelParams::attackable_bits() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.q.size();
  return n * kBitsPerCode;
}

std::size_t ModelParams::weight_index(const std::string& name) const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].name == name) return i;
  }
  throw ParameterError("no weight tensor named '" + name + "'");
}

std::size_t ModelParams::bias_index(const std::string& name) const {
  for (std::size_t i = 0; i < biases.size(); ++i) {
    if (biases[i].name == name) return i;
  }
  throw ParameterError("no bias named '" + name + "'");
}

namespace {

void add_linear(std::vector<ParamShape>& out, const std::string& prefix, int fan_in, int fan_out, bool bias) {
  out.push_back({prefix + ".weight", static_cast<std::size_t>(fan_in), static_cast<std::size_t>(fan_out), true});
  if (bias) out.push_back({prefix + ".bias", 1, static_cast<std::size_t>(fan_out), false});
}

void add_mlp(std::vector<ParamShape>& out, const std::string& prefix, int depth, int in_dim, int hidden) {
  for (int j = 0; j < depth; ++j) {
    add_linear(out, prefix + "." + std::to_string(j), j == 0 ? in_dim : hidden, hidden, true);
  }
}

}  // namespace

std::vector<ParamShape> parameter_layout(const ModelConfig& config) {
  config.validate();
  std::vector<ParamShape> out;
  for (int k = 0; k < config.num_layers; ++k) {
    const int in_dim = k == 0 ? config.input_dim : config.hidden_dim;
    const std::string layer = "layer" + std::to_string(k);
    if (config.architecture == Architecture::gin) {
      add_mlp(out, layer + ".mlp", config.mlp_depth, in_dim, config.hidden_dim);
    } else {
      add_linear(out, layer + ".linear", in_dim, config.hidden_dim, false);
    }
    if (config.virtual_node && k + 1 < config.num_layers) {
      add_mlp(out, layer + ".vn_mlp", config.mlp_depth, in_dim, config.hidden_dim);
    }
  }
  add_linear(out, "head", config.readout_dim(), config.output_dim, true);
  return out;
}

ModelParams init_model(const ModelConfig& config) {
  ModelParams m;
  m.config = config;
  Rng rng(config.seed);
  for (const auto& shape : parameter_layout(config)) {
    const std::size_t fan_in = shape.is_weight ? shape.rows : 0;
    Tensor t(shape.rows, shape.cols);
    if (shape.is_weight) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : t.data()) v = rng.uniform(-bound, bound);
      m.weights.push_back({shape.name, quantize(t)});
    } else {
      // bias fan-in is that of the weight just before it in the layout
      const auto& w = m.weights.back().q;
      const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows));
      for (auto& v : t.data()) v = rng.uniform(-bound, bound);
      m.biases.push_back({shape.name, std::move(t)});
    }
  }
  return m;
}

GraphBatch make_batch(std::span<const LabeledGraph> graphs, int input_dim) {
  GraphBatch b;
  b.num_graphs = graphs.size();
  std::size_t total = 0;
  for (const auto& g : graphs) total += static_cast<std::size_t>(g.node_count());
  b.node_features = Tensor(total, static_cast<std::size_t>(input_dim));
  b.node_graph.reserve(total);
  b.inv_closed_degree.reserve(total);
  int offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = graphs[gi];
    for (int v = 0; v < g.node_count(); ++v) {
      const int l = g.label(v);
      if (l >= input_dim) {
        throw DimensionError("node label " + std::to_string(l) + " exceeds input_dim " + std::to_string(input_dim));
      }
      b.node_features(static_cast<std::size_t>(offset + v), static_cast<std::size_t>(l)) = 1.0;
      b.node_graph.push_back(static_cast<int>(gi));
      b.inv_closed_degree.push_back(1.0 / static_cast<double>(g.degree(v) + 1));
    }
    for (const auto& e : g.edges()) {
      b.edge_src.push_back(offset + e.u);
      b.edge_dst.push_back(offset + e.v);
      b.edge_src.push_back(offset + e.v);
      b.edge_dst.push_back(offset + e.u);
    }
    offset += g.node_count();
  }
  return b;
}

GraphBatch make_batch(const Dataset& dataset, std::span<const std::size_t> indices, int input_dim) {
  std::vector<LabeledGraph> graphs;
  graphs.reserve(indices.size());
  for (auto i : indices) graphs.push_back(dataset.graphs.at(i));
  return make_batch(graphs, input_dim);
}

ModelBinding bind_model(Tape& tape, const ModelParams& model) {
  ModelBinding p;
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    p.weights.push_back(tape.parameter(dequantize(model.weights[i].q), static_cast<int>(i)));
  }
  for (const auto& b : model.biases) p.biases.push_back(tape.constant(b.value));
  return p;
}

namespace {

// Walks the binding in layout order.
struct Cursor {
  const ModelBinding& p;
  std::size_t w = 0;
  std::size_t b = 0;

  Var linear(Tape& tape, Var x, bool bias) {
    if (w >= p.weights.size() || (bias && b >= p.biases.size())) throw DimensionError("binding has too few parameters");
    Var y = tape.matmul(x, p.weights[w++]);
    if (bias) y = tape.add_bias_rowwise(y, p.biases[b++]);
    return y;
  }

  Var mlp(Tape& tape, Var x, int depth) {
    for (int j = 0; j < depth; ++j) {
      if (j > 0) x = tape.relu(x);
      x = linear(tape, x, true);
    }
    return x;
  }
};

Var neighbor_sum(Tape& tape, Var h, const GraphBatch& batch) {
  Var msg = tape.gather_rows(h, batch.edge_src);
  return tape.segment_sum(msg, batch.edge_dst, batch.num_nodes());
}

void check_batch(const ModelConfig& config, const GraphBatch& batch) {
  if (batch.node_features.cols() != static_cast<std::size_t>(config.input_dim)) {
    throw DimensionError("batch feature width " + std::to_string(batch.node_features.cols()) +
                         " differs from input_dim " + std::to_string(config.input_dim));
  }
}

// Runs the message-passing stack, returning the readout and leaving the cursor
// at the head.
Var encode(Tape& tape, const ModelConfig& config, Cursor& cur, const GraphBatch& batch) {
  config.validate();
  check_batch(config, batch);
  Var h = tape.constant(batch.node_features);
  std::vector<Var> pooled{tape.segment_sum(h, batch.node_graph, batch.num_graphs)};
  std::optional<Var> vn;
  for (int k = 0; k < config.num_layers; ++k) {
    Var in = vn ? tape.add(h, tape.gather_rows(*vn, batch.node_graph)) : h;
    Var next;
    if (config.architecture == Architecture::gin) {
      Var self = config.epsilon == 0.0 ? in : tape.scale(in, 1.0 + config.epsilon);
      next = cur.mlp(tape, tape.add(self, neighbor_sum(tape, in, batch)), config.mlp_depth);
    } else {
      Var mean = tape.scale_rows(tape.add(in, neighbor_sum(tape, in, batch)), batch.inv_closed_degree);
      next = tape.relu(cur.linear(tape, mean, false));
    }
    if (config.virtual_node && k + 1 < config.num_layers) {
      Var base = tape.segment_sum(in, batch.node_graph, batch.num_graphs);
      if (vn) base = tape.add(base, *vn);
      vn = cur.mlp(tape, base, config.mlp_depth);
    }
    h = next;
    pooled.push_back(tape.segment_sum(h, batch.node_graph, batch.num_graphs));
  }
  return tape.concat_cols(pooled);
}

}  // namespace

Var readout(Tape& tape, const ModelConfig& config, const ModelBinding& p, const GraphBatch& batch) {
  Cursor cur{p};
  return encode(tape, config, cur, batch);
}

Var model_forward(Tape& tape, const ModelConfig& config, const ModelBinding& p, const GraphBatch& batch) {
  Cursor cur{p};
  Var r = encode(tape, config, cur, batch);
  Var logits = cur.linear(tape, r, true);
  if (cur.w != p.weights.size() || cur.b != p.biases.size()) throw DimensionError("binding has unused parameters");
  return logits;
}

Var gin_forward(Tape& tape, const ModelConfig& config, const ModelBinding& p, const GraphBatch& batch) {
  if (config.architecture != Architecture::gin) throw ParameterError("gin_forward on a non-GIN config");
  return model_forward(tape, config, p, batch);
}

Var gcn_forward(Tape& tape, const ModelConfig& config, const ModelBinding& p, const GraphBatch& batch) {
  if (config.architecture != Architecture::gcn) throw ParameterError("gcn_forward on a non-GCN config");
  return model_forward(tape, config, p, batch);
}

Tensor predict(const ModelParams& model, const GraphBatch& batch) {
  Tape tape;
  const auto p = bind_model(tape, model);
  return tape.value(model_forward(tape, model.config, p, batch));
}

// ---- checkpoint container ----

namespace {

constexpr const char* kMagic = "QGNN-CKPT 1";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void put_double_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : s_(bytes) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("checkpoint byte offset " + std::to_string(pos_) + ": " + what);
  }

  std::vector<std::string> line() {
    const auto nl = s_.find('\n', pos_);
    if (nl == std::string::npos) fail("unexpected end of file");
    std::istringstream in(s_.substr(pos_, nl - pos_));
    std::vector<std::string> tok;
    for (std::string t; in >> t;) tok.push_back(t);
    line_start_ = pos_;
    pos_ = nl + 1;
    return tok;
  }

  std::vector<std::string> expect(const std::string& key, std::size_t n_values) {
    auto tok = line();
    if (tok.size() != n_values + 1 || tok[0] != key) {
      pos_ = line_start_;
      fail("expected '" + key + "' with " + std::to_string(n_values) + " value(s)");
    }
    return tok;
  }

  std::string_view raw(std::size_t n) {
    if (s_.size() - pos_ < n + 1) fail("truncated payload");
    std::string_view v(s_.data() + pos_, n);
    pos_ += n;
    if (s_[pos_] != '\n') fail("payload not terminated by newline");
    ++pos_;
    return v;
  }

  long long integer(const std::string& t) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || t.empty()) back_fail("bad integer '" + t + "'");
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& t) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || t.empty() || t[0] == '-') back_fail("bad unsigned integer '" + t + "'");
    return v;
  }

  double real(const std::string& t) {
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) back_fail("bad real '" + t + "'");
    return v;
  }

  [[noreturn]] void back_fail(const std::string& what) {
    pos_ = line_start_;
    fail(what);
  }

  bool at_end() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelParams& model) {
  const auto& c = model.config;
  std::string out;
  out += std::string(kMagic) + "\n";
  out += "architecture " + std::string(to_string(c.architecture)) + "\n";
  out += "num_layers " + std::to_string(c.num_layers) + "\n";
  out += "hidden_dim " + std::to_string(c.hidden_dim) + "\n";
  out += "input_dim " + std::to_string(c.input_dim) + "\n";
  out += "output_dim " + std::to_string(c.output_dim) + "\n";
  out += "mlp_depth " + std::to_string(c.mlp_depth) + "\n";
  out += "epsilon " + fmt17(c.epsilon) + "\n";
  out += "virtual_node " + std::string(c.virtual_node ? "1" : "0") + "\n";
  out += "seed " + std::to_string(c.seed) + "\n";
  out += "weights " + std::to_string(model.weights.size()) + "\n";
  for (const auto& w : model.weights) {
    out += "weight " + w.name + " " + std::to_string(w.q.rows) + " " + std::to_string(w.q.cols) + " " +
           fmt17(w.q.scale) + "\n";
    for (auto code : w.q.codes) out.push_back(static_cast<char>(code));
    out += "\n";
  }
  out += "biases " + std::to_string(model.biases.size()) + "\n";
  for (const auto& b : model.biases) {
    out += "bias " + b.name + " " + std::to_string(b.value.rows()) + " " + std::to_string(b.value.cols()) + "\n";
    for (double v : b.value.data()) put_double_le(out, v);
    out += "\n";
  }
  out += "end\n";
  return out;
}

ModelParams parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  {
    const auto t = r.line();
    if (t.size() != 2 || t[0] + " " + t[1] != kMagic) r.back_fail("not a checkpoint (bad magic line)");
  }
  ModelParams m;
  auto& c = m.config;
  try {
    c.architecture = parse_architecture(r.expect("architecture", 1)[1]);
  } catch (const ParameterError& e) {
    r.back_fail(e.what());
  }
  auto int_field = [&](const char* key) { return static_cast<int>(r.integer(r.expect(key, 1)[1])); };
  c.num_layers = int_field("num_layers");
  c.hidden_dim = int_field("hidden_dim");
  c.input_dim = int_field("input_dim");
  c.output_dim = int_field("output_dim");
  c.mlp_depth = int_field("mlp_depth");
  c.epsilon = r.real(r.expect("epsilon", 1)[1]);
  c.virtual_node = int_field("virtual_node") != 0;
  c.seed = r.unsigned_integer(r.expect("seed", 1)[1]);
  std::vector<ParamShape> layout;
  try {
    layout = parameter_layout(c);
  } catch (const ParameterError& e) {
    r.back_fail(std::string("invalid config: ") + e.what());
  }
  std::vector<ParamShape> wl, bl;
  for (auto& s : layout) (s.is_weight ? wl : bl).push_back(s);

  const auto nw = r.integer(r.expect("weights", 1)[1]);
  if (nw != static_cast<long long>(wl.size())) r.back_fail("weight count does not match config");
  for (const auto& shape : wl) {
    const auto t = r.expect("weight", 4);
    const auto rows = r.integer(t[2]);
    const auto cols = r.integer(t[3]);
    if (t[1] != shape.name || rows != static_cast<long long>(shape.rows) || cols != static_cast<long long>(shape.cols)) {
      r.back_fail("weight '" + t[1] + "' does not match the layout entry '" + shape.name + "'");
    }
    QuantizedTensor q;
    q.rows = shape.rows;
    q.cols = shape.cols;
    q.scale = r.real(t[4]);
    if (!(q.scale > 0.0) || !std::isfinite(q.scale)) r.back_fail("scale must be positive and finite");
    const auto payload = r.raw(shape.rows * shape.cols);
    q.codes.resize(payload.size());
    std::memcpy(q.codes.data(), payload.data(), payload.size());
    m.weights.push_back({shape.name, std::move(q)});
  }

  const auto nb = r.integer(r.expect("biases", 1)[1]);
  if (nb != static_cast<long long>(bl.size())) r.back_fail("bias count does not match config");
  for (const auto& shape : bl) {
    const auto t = r.expect("bias", 3);
    const auto rows = r.integer(t[2]);
    const auto cols = r.integer(t[3]);
    if (t[1] != shape.name || rows != static_cast<long long>(shape.rows) || cols != static_cast<long long>(shape.cols)) {
      r.back_fail("bias '" + t[1] + "' does not match the layout entry '" + shape.name + "'");
    }
    const auto payload = r.raw(8 * shape.rows * shape.cols);
    Tensor v(shape.rows, shape.cols);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[8 * i + static_cast<std::size_t>(k)])) << (8 * k);
      v[i] = std::bit_cast<double>(bits);
    }
    m.biases.push_back({shape.name, std::move(v)});
  }
  r.expect("end", 0);
  if (!r.at_end()) r.fail("trailing bytes after 'end'");
  return m;
}

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace qgnn
