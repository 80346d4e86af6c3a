#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "qgnn/errors.hpp"
#include "qgnn/split.hpp"
#include "qgnn/synthetic.hpp"
#include "qgnn/tu_io.hpp"
#include "qgnn/wl.hpp"

using namespace qgnn;
using namespace qgnn::testing;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("graph invariants are enforced") {
  CHECK_THROWS_AS(LabeledGraph(2, {{0, 0}}, {0, 0}), ConsistencyError);
  CHECK_THROWS_AS(LabeledGraph(2, {{0, 2}}, {0, 0}), ConsistencyError);
  CHECK_THROWS_AS(LabeledGraph(2, {{0, 1}, {1, 0}}, {0, 0}), ConsistencyError);
  CHECK_THROWS_AS(LabeledGraph(2, {}, {0}), ConsistencyError);
  CHECK_THROWS_AS(LabeledGraph(1, {}, {-1}), ConsistencyError);

  const LabeledGraph g(3, {{2, 1}, {1, 0}}, {0, 1, 0});
  CHECK(as_vector(g.edges()) == std::vector<Edge>{{0, 1}, {1, 2}});
  CHECK(g.degree(1) == 2);
  CHECK(std::vector<int>(g.neighbors(1).begin(), g.neighbors(1).end()) == std::vector<int>{0, 2});
  CHECK(g.connected());
  CHECK_FALSE(LabeledGraph::unlabeled(3, {{0, 1}}).connected());
}

TEST_CASE("relabeling preserves structure") {
  Rng rng(3);
  const auto g = random_graph(rng, 8, 0.4, 3);
  const auto perm = rng.permutation(8);
  const std::vector<int> p(perm.begin(), perm.end());
  const auto h = g.relabeled(p);
  CHECK(h.edges().size() == g.edges().size());
  for (int v = 0; v < 8; ++v) {
    CHECK(h.label(p[static_cast<std::size_t>(v)]) == g.label(v));
    CHECK(h.degree(p[static_cast<std::size_t>(v)]) == g.degree(v));
  }
}

TEST_CASE("TU loader: two triangles with labels 1 and 2") {
  const auto dir = scratch_dir("tu_triangles");
  write(dir / "T_A.txt", "1, 2\n2, 3\n3, 1\n4, 5\n5, 6\n6, 4\n");
  write(dir / "T_graph_indicator.txt", "1\n1\n1\n2\n2\n2\n");
  write(dir / "T_graph_labels.txt", "1\n2\n");
  const auto ds = load_tu_dataset(dir, "T");
  REQUIRE(ds.size() == 2);
  CHECK(ds.task_kind == TaskKind::binary_single);
  CHECK(ds.num_classes == 2);
  CHECK(ds.class_of(0) == 0);
  CHECK(ds.class_of(1) == 1);
  CHECK(as_vector(ds.graphs[1].edges()) == std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}});
  CHECK(ds.graphs[0].labels()[0] == 0);
}

TEST_CASE("TU loader: both edge directions collapse to one edge, CRLF tolerated") {
  const auto dir = scratch_dir("tu_dedup");
  write(dir / "D_A.txt", "1, 2\r\n2, 1\r\n");
  write(dir / "D_graph_indicator.txt", "1\r\n1\r\n");
  write(dir / "D_graph_labels.txt", "0\r\n");
  const auto ds = load_tu_dataset(dir, "D");
  REQUIRE(ds.size() == 1);
  CHECK(as_vector(ds.graphs[0].edges()) == std::vector<Edge>{{0, 1}});
}

TEST_CASE("TU loader errors") {
  const auto dir = scratch_dir("tu_errors");
  CHECK_THROWS_AS(load_tu_dataset(dir, "X"), FormatError);
  write(dir / "X_A.txt", "1, 3\n");
  write(dir / "X_graph_indicator.txt", "1\n1\n2\n");
  write(dir / "X_graph_labels.txt", "0\n1\n");
  CHECK_THROWS_AS(load_tu_dataset(dir, "X"), ConsistencyError);
}

TEST_CASE("TU loader: more than two graph labels give a multiclass dataset, node labels remapped") {
  const auto ds = load_tu_dataset(std::filesystem::path(QGNN_TEST_DATA) / "tu_toy", "TOY");
  REQUIRE(ds.size() == 3);
  CHECK(ds.task_kind == TaskKind::multiclass);
  CHECK(ds.num_classes == 3);
  CHECK(ds.class_targets == std::vector<int>{2, 0, 1});
  CHECK(ds.label_alphabet_size == 2);
  CHECK(ds.graphs[0].node_count() == 3);
  CHECK(as_vector(ds.graphs[0].edges()) == std::vector<Edge>{{0, 1}, {1, 2}});
  CHECK(std::vector<int>(ds.graphs[0].labels().begin(), ds.graphs[0].labels().end()) == std::vector<int>{0, 1, 0});
  CHECK(ds.graphs[1].node_count() == 1);
  CHECK(ds.graphs[1].edges().empty());
  CHECK(as_vector(ds.graphs[2].edges()) == std::vector<Edge>{{0, 1}});
}

TEST_CASE("TU writer: single isolated node") {
  const auto dir = scratch_dir("tu_single");
  write_tu_dataset(binary_dataset({LabeledGraph::unlabeled(1, {})}, {0}), dir, "S");
  CHECK(slurp(dir / "S_A.txt").empty());
  CHECK(slurp(dir / "S_graph_indicator.txt") == "1\n");
  CHECK(slurp(dir / "S_graph_labels.txt") == "0\n");
}

TEST_CASE("TU writer matches the frozen golden directory") {
  const auto dir = scratch_dir("tu_golden");
  const auto ds = binary_dataset({cycle_graph(3), path_graph(4)}, {0, 1});
  write_tu_dataset(ds, dir, "TP");
  const auto golden = std::filesystem::path(QGNN_TEST_DATA) / "golden_tri_path";
  for (const char* f : {"TP_A.txt", "TP_graph_indicator.txt", "TP_graph_labels.txt", "TP_node_labels.txt"}) {
    CAPTURE(f);
    CHECK(slurp(dir / f) == slurp(golden / f));
  }
}

TEST_CASE("TU round trip") {
  SUBCASE("three-graph fixture") {
    Rng rng(11);
    auto ds = binary_dataset({random_graph(rng, 5, 0.5, 2), random_graph(rng, 4, 0.5, 2), random_graph(rng, 6, 0.5, 2)},
                             {1, 0, 1}, 2);
    // the loader remaps labels densely, so make sure both labels occur
    ds.graphs[0] = LabeledGraph(5, std::vector<Edge>(ds.graphs[0].edges().begin(), ds.graphs[0].edges().end()), {0, 1, 0, 1, 1});
    const auto dir = scratch_dir("tu_roundtrip");
    write_tu_dataset(ds, dir, "R");
    CHECK(load_tu_dataset(dir, "R") == ds);
  }
  SUBCASE("generated synthetic data") {
    for (auto fam : {TaskFamily::cycles_vs_paths, TaskFamily::regular_pairs, TaskFamily::tree_depth}) {
      const auto ds = gen_wl_task(fam, 6, {6, 10}, 5);
      const auto dir = scratch_dir("tu_roundtrip_syn");
      write_tu_dataset(ds, dir, "G");
      CHECK(load_tu_dataset(dir, "G") == ds);
    }
  }
  SUBCASE("binary-multi is rejected") {
    Dataset d = binary_dataset({cycle_graph(3)}, {1});
    d.task_kind = TaskKind::binary_multi;
    d.num_tasks = 2;
    d.binary_targets = {BinaryTarget::positive, BinaryTarget::missing};
    CHECK_THROWS_AS(write_tu_dataset(d, scratch_dir("tu_multi"), "M"), FormatError);
  }
}

TEST_CASE("gen_wl_task: cycles vs paths base case") {
  const auto ds = gen_wl_task(TaskFamily::cycles_vs_paths, 1, {5, 5}, 99);
  REQUIRE(ds.size() == 2);
  CHECK(ds.class_of(0) == 0);
  CHECK(ds.class_of(1) == 1);
  CHECK(ds.graphs[0].edges().size() == 5);
  CHECK(ds.graphs[1].edges().size() == 4);
  for (const auto& g : ds.graphs) {
    CHECK(g.node_count() == 5);
    CHECK(g.connected());
    for (int l : g.labels()) CHECK(l == 0);
  }
  for (int v = 0; v < 5; ++v) CHECK(ds.graphs[0].degree(v) == 2);
}

TEST_CASE("gen_wl_task: families are WL-separable at k=2 and deterministic") {
  for (auto fam : {TaskFamily::cycles_vs_paths, TaskFamily::regular_pairs, TaskFamily::tree_depth}) {
    CAPTURE(to_string(fam));
    const auto ds = gen_wl_task(fam, 15, {6, 12}, 21);
    CHECK(ds == gen_wl_task(fam, 15, {6, 12}, 21));
    CHECK(ds.size() == 30);
    ds.validate();
    const auto colors = wl_refine(ds.graphs, 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(ds.graphs[i].node_count() >= 6);
      CHECK(ds.graphs[i].node_count() <= 12);
      CHECK(ds.graphs[i].connected());
      for (std::size_t j = 0; j < ds.size(); ++j) {
        if (ds.class_of(i) == ds.class_of(j)) continue;
        CHECK(multiset_jaccard(wl_color_multiset(colors[i], 2), wl_color_multiset(colors[j], 2)) > 0.0);
      }
    }
  }
}

TEST_CASE("gen_wl_task: regular pairs share degree sequences") {
  const auto ds = gen_wl_task(TaskFamily::regular_pairs, 10, {6, 11}, 4);
  for (std::size_t i = 0; i + 1 < ds.size(); i += 2) {
    auto degs = [](const LabeledGraph& g) {
      std::vector<int> d;
      for (int v = 0; v < g.node_count(); ++v) d.push_back(g.degree(v));
      std::sort(d.begin(), d.end());
      return d;
    };
    CHECK(degs(ds.graphs[i]) == degs(ds.graphs[i + 1]));
  }
}

TEST_CASE("gen_wl_task: tree depth") {
  const auto t = balanced_tree(10, 3);
  CHECK(t.node_count() == 10);
  CHECK(t.edges().size() == 9);
  CHECK(t.connected());
  CHECK_THROWS_AS(gen_wl_task(TaskFamily::tree_depth, 1, {3, 3}, 0), ParameterError);
}

TEST_CASE("gen_wl_task: parameter errors") {
  CHECK_THROWS_AS(gen_wl_task(TaskFamily::cycles_vs_paths, 1, {2, 2}, 0), ParameterError);
  CHECK_THROWS_AS(gen_wl_task(TaskFamily::cycles_vs_paths, 1, {6, 5}, 0), ParameterError);
  CHECK_THROWS_AS(gen_wl_task(TaskFamily::cycles_vs_paths, 0, {5, 6}, 0), ParameterError);
  CHECK_THROWS_AS(gen_wl_task(TaskFamily::regular_pairs, 1, {5, 5}, 0), ParameterError);
  CHECK_THROWS_AS(parse_task_family("nope"), ParameterError);
}

TEST_CASE("split sizes follow floor plus remainder") {
  auto make = [](int n) {
    std::vector<LabeledGraph> gs(static_cast<std::size_t>(n), LabeledGraph::unlabeled(1, {}));
    return binary_dataset(gs, std::vector<int>(static_cast<std::size_t>(n), 0));
  };
  auto s10 = split_dataset(make(10), {{0.8, 0.1, 0.1}, 1});
  CHECK(s10.train.size() == 8);
  CHECK(s10.valid.size() == 1);
  CHECK(s10.test.size() == 1);
  auto s7 = split_dataset(make(7), {{0.8, 0.1, 0.1}, 1});
  CHECK(s7.train.size() == 7);
  CHECK(s7.valid.size() == 0);
  CHECK(s7.test.size() == 0);
  CHECK_THROWS_AS(split_dataset(make(7), {{0.8, 0.1, 0.2}, 1}), ParameterError);
  CHECK_THROWS_AS(split_dataset(Dataset{}, {}), ParameterError);
}

TEST_CASE("split is a deterministic partition") {
  Rng rng(8);
  std::vector<LabeledGraph> gs;
  std::vector<int> ys;
  for (int i = 0; i < 53; ++i) {
    // node count encodes the index so the pieces can be traced back
    gs.push_back(LabeledGraph::unlabeled(i + 1, {}));
    ys.push_back(i % 2);
  }
  const auto ds = binary_dataset(gs, ys);
  const auto a = split_dataset(ds, {{0.8, 0.1, 0.1}, 77});
  const auto b = split_dataset(ds, {{0.8, 0.1, 0.1}, 77});
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  std::multiset<int> seen;
  for (const auto* part : {&a.train, &a.valid, &a.test}) {
    for (std::size_t i = 0; i < part->size(); ++i) {
      seen.insert(part->graphs[i].node_count());
      CHECK(part->class_of(i) == (part->graphs[i].node_count() - 1) % 2);
    }
  }
  CHECK(seen.size() == 53);
  CHECK(std::set<int>(seen.begin(), seen.end()).size() == 53);
}
