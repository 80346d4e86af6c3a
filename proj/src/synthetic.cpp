#include "qgnn/synthetic.hpp"

#include <algorithm>
#include <set>

#include "qgnn/errors.hpp"
#include "qgnn/rng.hpp"
#include "qgnn/wl.hpp"

namespace qgnn {

TaskFamily parse_task_family(const std::string& text) {
  if (text == "cycles-vs-paths") return TaskFamily::cycles_vs_paths;
  if (text == "regular-pairs") return TaskFamily::regular_pairs;
  if (text == "tree-depth") return TaskFamily::tree_depth;
  throw ParameterError("unknown task family '" + text + "'");
}

const char* to_string(TaskFamily family) {
  switch (family) {
    case TaskFamily::cycles_vs_paths: return "cycles-vs-paths";
    case TaskFamily::regular_pairs: return "regular-pairs";
    case TaskFamily::tree_depth: return "tree-depth";
  }
  return "?";
}

LabeledGraph cycle_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i) e.push_back({i, (i + 1) % n});
  return LabeledGraph::unlabeled(n, std::move(e));
}

LabeledGraph path_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return LabeledGraph::unlabeled(n, std::move(e));
}

LabeledGraph balanced_tree(int n, int depth) {
  if (depth < 1 || n - 1 < depth) throw ParameterError("balanced tree of depth " + std::to_string(depth) +
                                                       " needs more than " + std::to_string(depth) + " nodes");
  const int rest = n - 1;
  const int base = rest / depth;
  const int extra = rest % depth;
  // Non-decreasing level sizes, so every node above the last level gets at
  // least one child and all leaves sit at depth `depth`.
  std::vector<int> level_size{1};
  for (int l = 0; l < depth; ++l) level_size.push_back(base + (l >= depth - extra ? 1 : 0));

  std::vector<Edge> edges;
  int level_start = 0;
  for (int l = 0; l < depth; ++l) {
    const int next_start = level_start + level_size[static_cast<std::size_t>(l)];
    for (int j = 0; j < level_size[static_cast<std::size_t>(l) + 1]; ++j) {
      edges.push_back({level_start + j % level_size[static_cast<std::size_t>(l)], next_start + j});
    }
    level_start = next_start;
  }
  return LabeledGraph::unlabeled(n, std::move(edges));
}

namespace {

LabeledGraph random_connected(int n, Rng& rng) {
  std::set<Edge> edges;
  auto order = rng.permutation(static_cast<std::size_t>(n));
  for (int i = 1; i < n; ++i) {
    const int parent = static_cast<int>(order[rng.below(static_cast<std::uint64_t>(i))]);
    const int child = static_cast<int>(order[static_cast<std::size_t>(i)]);
    edges.insert({std::min(parent, child), std::max(parent, child)});
  }
  const auto extra = rng.between(1, std::max(1, n / 2));
  for (std::int64_t k = 0, tries = 0; k < extra && tries < 100; ++tries) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (edges.insert({a, b}).second) ++k;
  }
  return LabeledGraph::unlabeled(n, {edges.begin(), edges.end()});
}

// Degree-preserving double edge swaps: {a,b},{c,d} -> {a,d},{c,b}.
LabeledGraph rewire(const LabeledGraph& g, int swaps, Rng& rng) {
  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  std::set<Edge> present(edges.begin(), edges.end());
  auto norm = [](int x, int y) { return Edge{std::min(x, y), std::max(x, y)}; };
  for (int s = 0, tries = 0; s < swaps && tries < 50 * swaps; ++tries) {
    const auto i = rng.below(edges.size());
    const auto j = rng.below(edges.size());
    if (i == j) continue;
    auto [a, b] = edges[i];
    auto [c, d] = edges[j];
    if (rng.below(2) == 1) std::swap(c, d);
    if (a == d || c == b) continue;
    const Edge e1 = norm(a, d);
    const Edge e2 = norm(c, b);
    if (e1 == e2 || present.count(e1) || present.count(e2)) continue;
    present.erase(edges[i]);
    present.erase(edges[j]);
    present.insert(e1);
    present.insert(e2);
    edges[i] = e1;
    edges[j] = e2;
    ++s;
  }
  return LabeledGraph::unlabeled(g.node_count(), std::move(edges));
}

std::pair<LabeledGraph, LabeledGraph> regular_pair(int n, Rng& rng) {
  for (int attempt = 0; attempt < 500; ++attempt) {
    auto g = random_connected(n, rng);
    auto h = rewire(g, n, rng);
    if (!h.connected()) continue;
    const LabeledGraph both[] = {g, h};
    const auto colors = wl_refine(both, 2);
    if (wl_color_multiset(colors[0], 2) != wl_color_multiset(colors[1], 2)) return {g, h};
  }
  throw ParameterError("could not realize a regular-pairs instance with " + std::to_string(n) + " nodes");
}

LabeledGraph shuffled(const LabeledGraph& g, Rng& rng) {
  const auto p = rng.permutation(static_cast<std::size_t>(g.node_count()));
  const std::vector<int> perm(p.begin(), p.end());
  return g.relabeled(perm);
}

}  // namespace

Dataset gen_wl_task(TaskFamily family, int graphs_per_class, SizeRange sizes, std::uint64_t seed) {
  if (graphs_per_class < 1) throw ParameterError("graphs per class must be positive");
  if (sizes.lo < 3) throw ParameterError("size range lower bound must be at least 3");
  if (sizes.hi < sizes.lo) throw ParameterError("empty size range");
  if (family == TaskFamily::tree_depth && sizes.lo < 4) {
    throw ParameterError("tree-depth needs at least 4 nodes per graph");
  }
  if (family == TaskFamily::regular_pairs && sizes.lo < 6) {
    throw ParameterError("regular-pairs needs at least 6 nodes per graph");
  }

  Rng rng(seed);
  Dataset ds;
  ds.task_kind = TaskKind::binary_single;
  ds.num_tasks = 1;
  ds.num_classes = 2;
  ds.label_alphabet_size = 1;
  for (int i = 0; i < graphs_per_class; ++i) {
    const int n = static_cast<int>(rng.between(sizes.lo, sizes.hi));
    LabeledGraph g0, g1;
    switch (family) {
      case TaskFamily::cycles_vs_paths:
        g0 = cycle_graph(n);
        g1 = path_graph(n);
        break;
      case TaskFamily::regular_pairs:
        std::tie(g0, g1) = regular_pair(n, rng);
        break;
      case TaskFamily::tree_depth:
        g0 = balanced_tree(n, 2);
        g1 = balanced_tree(n, 3);
        break;
    }
    ds.graphs.push_back(shuffled(g0, rng));
    ds.binary_targets.push_back(BinaryTarget::negative);
    ds.graphs.push_back(shuffled(g1, rng));
    ds.binary_targets.push_back(BinaryTarget::positive);
  }
  return ds;
}

}  // namespace qgnn
