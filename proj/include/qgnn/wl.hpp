#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qgnn/graph.hpp"

namespace qgnn {

/// Per-round node colors of one graph. rounds[t][v] is c^(t)(v).
struct WLColoring {
  std::vector<std::vector<int>> rounds;
  int num_rounds() const { return static_cast<int>(rounds.size()) - 1; }
};

/// Color -> multiplicity. Entries always have positive counts.
struct ColorMultiset {
  std::map<int, std::size_t> counts;
  std::size_t total() const;
  friend bool operator==(const ColorMultiset&, const ColorMultiset&) = default;
};

/// Joint color refinement over a list of graphs.
///
/// Round 0 relabels the node labels densely in first-occurrence order. Round
/// t > 0 maps the pair (c^(t-1)(v), sorted neighbor colors) to an integer via
/// a palette shared by all graphs: a pair seen for the first time receives the
/// next unused id. Ids never repeat across rounds. Palette insertion order is
/// (graph index, node index) ascending, so the output is canonical for a given
/// input list. Exactly k rounds are run; no early stopping.
std::vector<WLColoring> wl_refine(std::span<const LabeledGraph> graphs, int k);

/// Same refinement starting from explicit round-0 colorings (one per graph)
/// instead of node labels. The initial colors are relabeled densely first.
std::vector<WLColoring> wl_refine_from(std::span<const LabeledGraph> graphs,
                                       std::span<const std::vector<int>> initial, int k);

ColorMultiset wl_color_multiset(const WLColoring& coloring, int round);

/// Groups node indices by color at one round: returns the partition as
/// sorted blocks, blocks ordered by their smallest member.
std::vector<std::vector<int>> color_partition(std::span<const int> colors);

struct UnfoldingTree {
  int root_label = 0;
  std::vector<UnfoldingTree> children;
  int height() const;
  std::size_t size() const;
};

/// T^(k)(v): root labeled l(v) whose children are T^(k-1)(w) for every
/// neighbor w (walks may backtrack to the parent).
UnfoldingTree unfolding_tree(const LabeledGraph& graph, int v, int k);

/// Canonical string: "(label child child ...)" with child encodings sorted.
std::string canonical_form(const UnfoldingTree& tree);

bool trees_isomorphic(const UnfoldingTree& a, const UnfoldingTree& b);

/// 1 - sum min(mA, mB) / sum max(mA, mB). Throws ParameterError when both
/// multisets are empty.
double multiset_jaccard(const ColorMultiset& a, const ColorMultiset& b);

struct GlwlEntry {
  int k = 0;
  int cls = 0;
  double mean_jaccard = 0.0;
  std::size_t pairs_counted = 0;
};

/// Mean within-class pairwise multiset Jaccard distance of k-round WL color
/// multisets, for k = 1..k_max, over a seeded sample of at most sample_size
/// graphs colored under one palette. Rows are ordered by (k, class).
///
/// Binary-multi data is handled per task over graphs with a present target;
/// the row for class c is the mean over tasks where c has at least two
/// graphs, and pairs_counted sums over those tasks.
std::vector<GlwlEntry> epsilon_glwl_statistic(const Dataset& dataset, int k_max,
                                              std::size_t sample_size, std::uint64_t seed);

}  // namespace qgnn
