#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace qgnn {

/// Undirected edge stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Simple undirected graph with a discrete label per node.
///
/// Construction validates the invariants (endpoints in range, no self-loops,
/// no duplicate edges, one label per node) and normalizes the edge list to
/// sorted (u < v) order, so two graphs built from the same edge set compare
/// equal regardless of input order. Instances are immutable.
class LabeledGraph {
 public:
  LabeledGraph() = default;
  LabeledGraph(int node_count, std::vector<Edge> edges, std::vector<int> node_labels);

  /// Unlabeled convenience: every node gets label 0.
  static LabeledGraph unlabeled(int node_count, std::vector<Edge> edges);

  int node_count() const { return node_count_; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const int> labels() const { return labels_; }
  int label(int v) const { return labels_[static_cast<std::size_t>(v)]; }

  /// Sorted neighbor list of v.
  std::span<const int> neighbors(int v) const;
  int degree(int v) const { return static_cast<int>(neighbors(v).size()); }

  /// Same graph with nodes renamed: node v becomes perm[v].
  LabeledGraph relabeled(std::span<const int> perm) const;

  bool connected() const;

  friend bool operator==(const LabeledGraph& a, const LabeledGraph& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_ && a.labels_ == b.labels_;
  }

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> labels_;
  std::vector<std::size_t> adj_offsets_{0};
  std::vector<int> adj_;
};

enum class TaskKind { binary_single, binary_multi, multiclass };

/// Binary targets carry an explicit missing state; no NaN sentinels.
enum class BinaryTarget : std::uint8_t { negative = 0, positive = 1, missing = 2 };

const char* to_string(TaskKind kind);

/// Graphs plus per-graph targets.
///
/// Binary tasks store a row-major (graphs x num_tasks) matrix in
/// `binary_targets`; multiclass tasks store one class index per graph in
/// `class_targets`. Exactly one of the two is populated.
struct Dataset {
  std::vector<LabeledGraph> graphs;
  TaskKind task_kind = TaskKind::binary_single;
  int num_tasks = 1;
  int num_classes = 2;
  int label_alphabet_size = 1;
  std::vector<BinaryTarget> binary_targets;
  std::vector<int> class_targets;

  std::size_t size() const { return graphs.size(); }
  bool empty() const { return graphs.empty(); }

  /// Model output width: tasks for binary data, classes for multiclass.
  int output_dim() const { return task_kind == TaskKind::multiclass ? num_classes : num_tasks; }

  BinaryTarget binary_target(std::size_t graph, int task) const {
    return binary_targets[graph * static_cast<std::size_t>(num_tasks) + static_cast<std::size_t>(task)];
  }

  /// Class of graph g for single-label data (binary-single or multiclass).
  int class_of(std::size_t graph) const;

  /// Throws ConsistencyError when shape invariants are violated.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace qgnn
