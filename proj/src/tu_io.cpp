#include "qgnn/tu_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qgnn/errors.hpp"

namespace qgnn {

namespace fs = std::filesystem;

namespace {

// Integer records of a file, one vector per non-blank line. Commas, tabs,
// spaces and a trailing CR all act as separators.
std::vector<std::vector<long long>> read_records(const fs::path& path, bool required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (required) throw FormatError("missing file " + path.string());
    return {};
  }
  std::vector<std::vector<long long>> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace_if(line.begin(), line.end(), [](char c) { return c == ',' || c == '\r' || c == '\t'; }, ' ');
    std::istringstream fields(line);
    std::vector<long long> rec;
    std::string tok;
    while (fields >> tok) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        throw FormatError(path.filename().string() + ":" + std::to_string(line_no) + ": not an integer: '" + tok + "'");
      }
      rec.push_back(v);
    }
    if (!rec.empty()) records.push_back(std::move(rec));
  }
  return records;
}

fs::path file_of(const fs::path& dir, const std::string& name, const char* suffix) {
  return dir / (name + suffix);
}

}  // namespace

Dataset load_tu_dataset(const fs::path& directory, const std::string& name) {
  const auto edges = read_records(file_of(directory, name, "_A.txt"), true);
  const auto indicator = read_records(file_of(directory, name, "_graph_indicator.txt"), true);
  const auto graph_labels = read_records(file_of(directory, name, "_graph_labels.txt"), true);
  const auto node_labels = read_records(file_of(directory, name, "_node_labels.txt"), false);

  const std::size_t total_nodes = indicator.size();
  const std::size_t num_graphs = graph_labels.size();
  if (!node_labels.empty() && node_labels.size() != total_nodes) {
    throw FormatError("node label count " + std::to_string(node_labels.size()) + " differs from indicator count " +
                      std::to_string(total_nodes));
  }

  std::vector<std::size_t> graph_of(total_nodes);
  std::vector<int> local(total_nodes);
  std::vector<int> sizes(num_graphs, 0);
  for (std::size_t v = 0; v < total_nodes; ++v) {
    const long long g = indicator[v].at(0);
    if (g < 1 || static_cast<std::size_t>(g) > num_graphs) {
      throw ConsistencyError("node " + std::to_string(v + 1) + " assigned to graph " + std::to_string(g) +
                             " of " + std::to_string(num_graphs));
    }
    graph_of[v] = static_cast<std::size_t>(g - 1);
    local[v] = sizes[graph_of[v]]++;
  }

  std::map<long long, int> node_label_map;
  for (const auto& r : node_labels) node_label_map.emplace(r.at(0), 0);
  int next = 0;
  for (auto& [_, id] : node_label_map) id = next++;

  std::vector<std::set<Edge>> graph_edges(num_graphs);
  for (const auto& r : edges) {
    if (r.size() < 2) throw FormatError("edge record needs two node ids");
    const long long a = r[0];
    const long long b = r[1];
    if (a < 1 || b < 1 || static_cast<std::size_t>(a) > total_nodes || static_cast<std::size_t>(b) > total_nodes) {
      throw ConsistencyError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") references an unknown node");
    }
    const auto ua = static_cast<std::size_t>(a - 1);
    const auto ub = static_cast<std::size_t>(b - 1);
    if (graph_of[ua] != graph_of[ub]) {
      throw ConsistencyError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") crosses graphs");
    }
    if (ua == ub) throw ConsistencyError("self-loop at node " + std::to_string(a));
    Edge e{local[ua], local[ub]};
    if (e.u > e.v) std::swap(e.u, e.v);
    graph_edges[graph_of[ua]].insert(e);
  }

  std::vector<std::vector<int>> labels(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) labels[g].assign(static_cast<std::size_t>(sizes[g]), 0);
  if (!node_labels.empty()) {
    for (std::size_t v = 0; v < total_nodes; ++v) {
      labels[graph_of[v]][static_cast<std::size_t>(local[v])] = node_label_map.at(node_labels[v].at(0));
    }
  }

  Dataset ds;
  ds.label_alphabet_size = std::max(1, static_cast<int>(node_label_map.size()));
  ds.graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    ds.graphs.emplace_back(sizes[g], std::vector<Edge>(graph_edges[g].begin(), graph_edges[g].end()),
                           std::move(labels[g]));
  }

  std::map<long long, int> class_map;
  for (const auto& r : graph_labels) class_map.emplace(r.at(0), 0);
  next = 0;
  for (auto& [_, id] : class_map) id = next++;
  const int num_classes = static_cast<int>(class_map.size());
  if (num_classes <= 2) {
    ds.task_kind = TaskKind::binary_single;
    ds.num_tasks = 1;
    ds.num_classes = 2;
    for (const auto& r : graph_labels) {
      ds.binary_targets.push_back(class_map.at(r[0]) == 0 ? BinaryTarget::negative : BinaryTarget::positive);
    }
  } else {
    ds.task_kind = TaskKind::multiclass;
    ds.num_tasks = 1;
    ds.num_classes = num_classes;
    for (const auto& r : graph_labels) ds.class_targets.push_back(class_map.at(r[0]));
  }
  ds.validate();
  return ds;
}

void write_tu_dataset(const Dataset& dataset, const fs::path& directory, const std::string& name) {
  if (dataset.task_kind == TaskKind::binary_multi) {
    throw FormatError("the TU layout holds one label per graph; binary-multi data is unsupported");
  }
  dataset.validate();
  std::ostringstream a, indicator, graph_labels, node_labels;
  std::size_t offset = 0;
  for (std::size_t g = 0; g < dataset.size(); ++g) {
    const auto& graph = dataset.graphs[g];
    std::vector<std::pair<std::size_t, std::size_t>> directed;
    for (const auto& e : graph.edges()) {
      directed.emplace_back(offset + static_cast<std::size_t>(e.u) + 1, offset + static_cast<std::size_t>(e.v) + 1);
      directed.emplace_back(offset + static_cast<std::size_t>(e.v) + 1, offset + static_cast<std::size_t>(e.u) + 1);
    }
    std::sort(directed.begin(), directed.end());
    for (const auto& [i, j] : directed) a << i << ", " << j << '\n';
    for (int v = 0; v < graph.node_count(); ++v) {
      indicator << (g + 1) << '\n';
      node_labels << graph.label(v) << '\n';
    }
    if (dataset.task_kind == TaskKind::multiclass) {
      graph_labels << dataset.class_targets[g] << '\n';
    } else {
      const auto t = dataset.binary_target(g, 0);
      if (t == BinaryTarget::missing) throw FormatError("graph " + std::to_string(g) + " has a missing target");
      graph_labels << static_cast<int>(t) << '\n';
    }
    offset += static_cast<std::size_t>(graph.node_count());
  }

  fs::create_directories(directory);
  auto emit = [&](const char* suffix, const std::string& text) {
    std::ofstream out(file_of(directory, name, suffix), std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + file_of(directory, name, suffix).string());
    out << text;
  };
  emit("_A.txt", a.str());
  emit("_graph_indicator.txt", indicator.str());
  emit("_graph_labels.txt", graph_labels.str());
  emit("_node_labels.txt", node_labels.str());
}

}  // namespace qgnn
