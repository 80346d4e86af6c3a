#include "qgnn/graph.hpp"

#include <algorithm>
#include <string>

#include "qgnn/errors.hpp"

namespace qgnn {

LabeledGraph::LabeledGraph(int node_count, std::vector<Edge> edges, std::vector<int> node_labels)
    : node_count_(node_count), edges_(std::move(edges)), labels_(std::move(node_labels)) {
  if (node_count_ < 0) throw ConsistencyError("negative node count");
  if (labels_.size() != static_cast<std::size_t>(node_count_)) {
    throw ConsistencyError("node label count " + std::to_string(labels_.size()) +
                           " differs from node count " + std::to_string(node_count_));
  }
  for (int l : labels_) {
    if (l < 0) throw ConsistencyError("negative node label");
  }
  for (auto& e : edges_) {
    if (e.u < 0 || e.v < 0 || e.u >= node_count_ || e.v >= node_count_) {
      throw ConsistencyError("edge {" + std::to_string(e.u) + "," + std::to_string(e.v) +
                             "} outside node range " + std::to_string(node_count_));
    }
    if (e.u == e.v) throw ConsistencyError("self-loop at node " + std::to_string(e.u));
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw ConsistencyError("duplicate edge");
  }

  std::vector<std::size_t> degree(static_cast<std::size_t>(node_count_), 0);
  for (const auto& e : edges_) {
    ++degree[static_cast<std::size_t>(e.u)];
    ++degree[static_cast<std::size_t>(e.v)];
  }
  adj_offsets_.assign(static_cast<std::size_t>(node_count_) + 1, 0);
  for (std::size_t v = 0; v < degree.size(); ++v) adj_offsets_[v + 1] = adj_offsets_[v] + degree[v];
  adj_.assign(adj_offsets_.back(), 0);
  std::vector<std::size_t> fill(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (const auto& e : edges_) {
    adj_[fill[static_cast<std::size_t>(e.u)]++] = e.v;
    adj_[fill[static_cast<std::size_t>(e.v)]++] = e.u;
  }
  for (std::size_t v = 0; v < degree.size(); ++v) {
    std::sort(adj_.begin() + static_cast<std::ptrdiff_t>(adj_offsets_[v]),
              adj_.begin() + static_cast<std::ptrdiff_t>(adj_offsets_[v + 1]));
  }
}

LabeledGraph LabeledGraph::unlabeled(int node_count, std::vector<Edge> edges) {
  return LabeledGraph(node_count, std::move(edges), std::vector<int>(static_cast<std::size_t>(node_count), 0));
}

std::span<const int> LabeledGraph::neighbors(int v) const {
  const auto i = static_cast<std::size_t>(v);
  return {adj_.data() + adj_offsets_[i], adj_offsets_[i + 1] - adj_offsets_[i]};
}

LabeledGraph LabeledGraph::relabeled(std::span<const int> perm) const {
  if (perm.size() != static_cast<std::size_t>(node_count_)) throw ParameterError("permutation size mismatch");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const auto& e : edges_) edges.push_back({perm[static_cast<std::size_t>(e.u)], perm[static_cast<std::size_t>(e.v)]});
  std::vector<int> labels(labels_.size());
  for (std::size_t v = 0; v < labels_.size(); ++v) labels[static_cast<std::size_t>(perm[v])] = labels_[v];
  return LabeledGraph(node_count_, std::move(edges), std::move(labels));
}

bool LabeledGraph::connected() const {
  if (node_count_ <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(node_count_), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : neighbors(v)) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  return reached == node_count_;
}

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::binary_single: return "binary-single";
    case TaskKind::binary_multi: return "binary-multi";
    case TaskKind::multiclass: return "multiclass";
  }
  return "?";
}

int Dataset::class_of(std::size_t graph) const {
  if (task_kind == TaskKind::multiclass) return class_targets[graph];
  if (task_kind == TaskKind::binary_single) {
    const auto t = binary_target(graph, 0);
    if (t == BinaryTarget::missing) throw ConsistencyError("graph " + std::to_string(graph) + " has no target");
    return static_cast<int>(t);
  }
  throw ConsistencyError("class_of is undefined for multi-task data");
}

void Dataset::validate() const {
  if (label_alphabet_size < 1) throw ConsistencyError("label alphabet must be non-empty");
  for (const auto& g : graphs) {
    for (int l : g.labels()) {
      if (l >= label_alphabet_size) throw ConsistencyError("node label outside the label alphabet");
    }
  }
  if (task_kind == TaskKind::multiclass) {
    if (num_classes < 1) throw ConsistencyError("multiclass data needs num_classes >= 1");
    if (class_targets.size() != graphs.size()) throw ConsistencyError("target rows differ from graph count");
    if (!binary_targets.empty()) throw ConsistencyError("multiclass data carries binary targets");
    for (int c : class_targets) {
      if (c < 0 || c >= num_classes) throw ConsistencyError("class target out of range");
    }
  } else {
    if (num_tasks < 1) throw ConsistencyError("binary data needs at least one task");
    if (task_kind == TaskKind::binary_single && num_tasks != 1) throw ConsistencyError("binary-single data has one task");
    if (binary_targets.size() != graphs.size() * static_cast<std::size_t>(num_tasks)) {
      throw ConsistencyError("target rows differ from graph count");
    }
    if (!class_targets.empty()) throw ConsistencyError("binary data carries class targets");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.task_kind = task_kind;
  out.num_tasks = num_tasks;
  out.num_classes = num_classes;
  out.label_alphabet_size = label_alphabet_size;
  out.graphs.reserve(indices.size());
  for (auto i : indices) {
    out.graphs.push_back(graphs.at(i));
    if (task_kind == TaskKind::multiclass) {
      out.class_targets.push_back(class_targets[i]);
    } else {
      for (int t = 0; t < num_tasks; ++t) out.binary_targets.push_back(binary_target(i, t));
    }
  }
  return out;
}

}  // namespace qgnn
