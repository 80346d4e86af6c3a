#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qgnn/graph.hpp"
#include "qgnn/rng.hpp"

namespace qgnn::testing {

// Erdos-Renyi G(n, p) with labels drawn from [0, alphabet).
inline LabeledGraph random_graph(Rng& rng, int n, double p, int alphabet = 1) {
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.uniform01() < p) edges.push_back({u, v});
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(alphabet)));
  return LabeledGraph(n, std::move(edges), std::move(labels));
}

// Ten-node worked example; nodes a..j are indices 0..9.
inline LabeledGraph figure_graph() {
  auto id = [](char c) { return c - 'a'; };
  const char* pairs[] = {"ac", "ad", "aj", "cj", "dj", "je", "jf", "jb", "eb", "fb", "jh", "hg", "gi"};
  std::vector<Edge> edges;
  for (const char* p : pairs) edges.push_back({id(p[0]), id(p[1])});
  return LabeledGraph::unlabeled(10, std::move(edges));
}

// Partition blocks written as strings of node letters, e.g. {"ab", "cdef"}.
inline std::vector<std::vector<int>> letters(std::initializer_list<const char*> blocks) {
  std::vector<std::vector<int>> out;
  for (const char* b : blocks) {
    std::vector<int> block;
    for (const char* c = b; *c; ++c) block.push_back(*c - 'a');
    out.push_back(block);
  }
  return out;
}

inline Dataset binary_dataset(std::vector<LabeledGraph> graphs, std::vector<int> targets, int alphabet = 1) {
  Dataset d;
  d.graphs = std::move(graphs);
  d.task_kind = TaskKind::binary_single;
  d.num_tasks = 1;
  d.num_classes = 2;
  d.label_alphabet_size = alphabet;
  for (int t : targets) d.binary_targets.push_back(t ? BinaryTarget::positive : BinaryTarget::negative);
  return d;
}

template <class T>
std::vector<std::remove_const_t<T>> as_vector(std::span<T> s) {
  return {s.begin(), s.end()};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qgnn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace qgnn::testing
