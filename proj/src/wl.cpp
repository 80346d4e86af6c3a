#include "qgnn/wl.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "qgnn/errors.hpp"
#include "qgnn/rng.hpp"

namespace qgnn {

std::size_t ColorMultiset::total() const {
  std::size_t t = 0;
  for (const auto& [_, m] : counts) t += m;
  return t;
}

std::vector<WLColoring> wl_refine_from(std::span<const LabeledGraph> graphs,
                                       std::span<const std::vector<int>> initial, int k) {
  if (k < 0) throw ParameterError("WL round count must be non-negative");
  if (initial.size() != graphs.size()) throw ParameterError("one initial coloring per graph required");

  std::vector<WLColoring> out(graphs.size());
  int next_id = 0;
  std::unordered_map<int, int> dense;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    if (initial[g].size() != static_cast<std::size_t>(graphs[g].node_count())) {
      throw ParameterError("initial coloring size differs from node count");
    }
    auto& r0 = out[g].rounds.emplace_back();
    r0.reserve(initial[g].size());
    for (int c : initial[g]) {
      auto [it, inserted] = dense.try_emplace(c, next_id);
      if (inserted) ++next_id;
      r0.push_back(it->second);
    }
  }

  std::vector<int> key;
  for (int t = 1; t <= k; ++t) {
    std::map<std::vector<int>, int> palette;
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      const auto& graph = graphs[g];
      const auto& prev = out[g].rounds.back();
      std::vector<int> cur(prev.size());
      for (int v = 0; v < graph.node_count(); ++v) {
        key.clear();
        key.push_back(prev[static_cast<std::size_t>(v)]);
        for (int w : graph.neighbors(v)) key.push_back(prev[static_cast<std::size_t>(w)]);
        std::sort(key.begin() + 1, key.end());
        auto [it, inserted] = palette.try_emplace(key, next_id);
        if (inserted) ++next_id;
        cur[static_cast<std::size_t>(v)] = it->second;
      }
      out[g].rounds.push_back(std::move(cur));
    }
  }
  return out;
}

std::vector<WLColoring> wl_refine(std::span<const LabeledGraph> graphs, int k) {
  std::vector<std::vector<int>> initial;
  initial.reserve(graphs.size());
  for (const auto& g : graphs) initial.emplace_back(g.labels().begin(), g.labels().end());
  return wl_refine_from(graphs, initial, k);
}

ColorMultiset wl_color_multiset(const WLColoring& coloring, int round) {
  if (round < 0 || round > coloring.num_rounds()) {
    throw ParameterError("round " + std::to_string(round) + " outside 0.." + std::to_string(coloring.num_rounds()));
  }
  ColorMultiset m;
  for (int c : coloring.rounds[static_cast<std::size_t>(round)]) ++m.counts[c];
  return m;
}

std::vector<std::vector<int>> color_partition(std::span<const int> colors) {
  std::map<int, std::vector<int>> blocks;
  for (std::size_t v = 0; v < colors.size(); ++v) blocks[colors[v]].push_back(static_cast<int>(v));
  std::vector<std::vector<int>> out;
  for (auto& [_, b] : blocks) out.push_back(std::move(b));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

int UnfoldingTree::height() const {
  int h = 0;
  for (const auto& c : children) h = std::max(h, c.height() + 1);
  return h;
}

std::size_t UnfoldingTree::size() const {
  std::size_t s = 1;
  for (const auto& c : children) s += c.size();
  return s;
}

UnfoldingTree unfolding_tree(const LabeledGraph& graph, int v, int k) {
  if (v < 0 || v >= graph.node_count()) throw ParameterError("node index out of range");
  if (k < 0) throw ParameterError("tree height must be non-negative");
  UnfoldingTree t;
  t.root_label = graph.label(v);
  if (k > 0) {
    for (int w : graph.neighbors(v)) t.children.push_back(unfolding_tree(graph, w, k - 1));
  }
  return t;
}

std::string canonical_form(const UnfoldingTree& tree) {
  std::vector<std::string> kids;
  kids.reserve(tree.children.size());
  for (const auto& c : tree.children) kids.push_back(canonical_form(c));
  std::sort(kids.begin(), kids.end());
  std::string s = "(" + std::to_string(tree.root_label);
  for (const auto& c : kids) {
    s += ' ';
    s += c;
  }
  s += ')';
  return s;
}

bool trees_isomorphic(const UnfoldingTree& a, const UnfoldingTree& b) {
  return canonical_form(a) == canonical_form(b);
}

double multiset_jaccard(const ColorMultiset& a, const ColorMultiset& b) {
  if (a.counts.empty() && b.counts.empty()) throw ParameterError("Jaccard distance of two empty multisets");
  std::size_t inter = 0;
  std::size_t uni = 0;
  auto ia = a.counts.begin();
  auto ib = b.counts.begin();
  while (ia != a.counts.end() || ib != b.counts.end()) {
    if (ib == b.counts.end() || (ia != a.counts.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.counts.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Mean pairwise distance over members (indices into `sets`). Partial sums are
// taken per first index in parallel and combined serially in index order.
std::pair<double, std::size_t> mean_pairwise(const std::vector<ColorMultiset>& sets,
                                             const std::vector<std::size_t>& members) {
  const auto n = static_cast<std::ptrdiff_t>(members.size());
  std::vector<double> partial(members.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      s += multiset_jaccard(sets[members[static_cast<std::size_t>(i)]], sets[members[static_cast<std::size_t>(j)]]);
    }
    partial[static_cast<std::size_t>(i)] = s;
  }
  const double sum = std::accumulate(partial.begin(), partial.end(), 0.0);
  const std::size_t pairs = members.size() * (members.size() - 1) / 2;
  return {sum / static_cast<double>(pairs), pairs};
}

}  // namespace

std::vector<GlwlEntry> epsilon_glwl_statistic(const Dataset& dataset, int k_max, std::size_t sample_size,
                                              std::uint64_t seed) {
  if (k_max < 1) throw ParameterError("k_max must be positive");
  if (sample_size < 1) throw ParameterError("sample size must be positive");
  Rng rng(seed);
  auto perm = rng.permutation(dataset.size());
  perm.resize(std::min(sample_size, dataset.size()));
  std::sort(perm.begin(), perm.end());

  std::vector<LabeledGraph> graphs;
  graphs.reserve(perm.size());
  for (auto i : perm) graphs.push_back(dataset.graphs[i]);
  const auto colorings = wl_refine(graphs, k_max);

  // (task, class) -> sampled positions.
  struct Group {
    int task;
    int cls;
    std::vector<std::size_t> members;
  };
  std::vector<Group> groups;
  const int num_classes = dataset.task_kind == TaskKind::multiclass ? dataset.num_classes : 2;
  const int num_tasks = dataset.task_kind == TaskKind::binary_multi ? dataset.num_tasks : 1;
  for (int t = 0; t < num_tasks; ++t) {
    for (int c = 0; c < num_classes; ++c) groups.push_back({t, c, {}});
  }
  for (std::size_t s = 0; s < perm.size(); ++s) {
    const auto g = perm[s];
    if (dataset.task_kind == TaskKind::binary_multi) {
      for (int t = 0; t < num_tasks; ++t) {
        const auto target = dataset.binary_target(g, t);
        if (target != BinaryTarget::missing) {
          groups[static_cast<std::size_t>(t * 2 + static_cast<int>(target))].members.push_back(s);
        }
      }
    } else {
      groups[static_cast<std::size_t>(dataset.class_of(g))].members.push_back(s);
    }
  }
  if (dataset.task_kind != TaskKind::binary_multi) {
    for (const auto& grp : groups) {
      if (grp.members.size() < 2) {
        throw StatisticsError("class " + std::to_string(grp.cls) + " has " + std::to_string(grp.members.size()) +
                              " sampled graphs; at least 2 are required");
      }
    }
  } else {
    for (int c = 0; c < 2; ++c) {
      const bool any = std::any_of(groups.begin(), groups.end(),
                                   [&](const Group& g) { return g.cls == c && g.members.size() >= 2; });
      if (!any) throw StatisticsError("class " + std::to_string(c) + " has fewer than 2 sampled graphs in every task");
    }
  }

  std::vector<GlwlEntry> rows;
  for (int k = 1; k <= k_max; ++k) {
    std::vector<ColorMultiset> sets;
    sets.reserve(colorings.size());
    for (const auto& c : colorings) sets.push_back(wl_color_multiset(c, k));
    for (int c = 0; c < num_classes; ++c) {
      double mean_sum = 0.0;
      std::size_t tasks = 0;
      std::size_t pairs = 0;
      for (const auto& grp : groups) {
        if (grp.cls != c || grp.members.size() < 2) continue;
        const auto [mean, p] = mean_pairwise(sets, grp.members);
        mean_sum += mean;
        pairs += p;
        ++tasks;
      }
      rows.push_back({k, c, mean_sum / static_cast<double>(tasks), pairs});
    }
  }
  return rows;
}

}  // namespace qgnn
