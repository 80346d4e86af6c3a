#pragma once

#include <cstdint>
#include <string>

#include "qgnn/graph.hpp"

namespace qgnn {

enum class TaskFamily { cycles_vs_paths, regular_pairs, tree_depth };

TaskFamily parse_task_family(const std::string& text);
const char* to_string(TaskFamily family);

struct SizeRange {
  int lo = 5;
  int hi = 12;
};

/// Binary-single structural task with uniform node labels. Graphs come in
/// (class 0, class 1) pairs sharing a node count drawn uniformly from `sizes`,
/// and every node ordering is shuffled.
///
///  - cycles_vs_paths: C_n vs P_n.
///  - regular_pairs:   a random connected graph vs a degree-preserving rewiring
///                     of it whose 2-round WL color multiset differs (n >= 6).
///  - tree_depth:      balanced trees (all leaves on the last level, level
///                     sizes as even as possible) of depth 2 vs depth 3 (n >= 4).
Dataset gen_wl_task(TaskFamily family, int graphs_per_class, SizeRange sizes, std::uint64_t seed);

LabeledGraph cycle_graph(int n);
LabeledGraph path_graph(int n);
LabeledGraph balanced_tree(int n, int depth);

}  // namespace qgnn
