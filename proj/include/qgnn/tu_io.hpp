#pragma once

#include <filesystem>
#include <string>

#include "qgnn/graph.hpp"

namespace qgnn {

/// Reads the flat-file layout of the TU graph collection:
///   <name>_A.txt               1-indexed global edge list "i, j"
///   <name>_graph_indicator.txt  graph id (1-indexed) per node
///   <name>_graph_labels.txt     one label per graph
///   <name>_node_labels.txt      optional, one label per node
///
/// Separators may be commas and/or whitespace; CR/LF is tolerated. Edges are
/// made undirected and deduplicated. Graph labels are remapped to 0..C-1 in
/// sorted order; two distinct labels yield a binary-single dataset, more yield
/// multiclass. Node labels are remapped to a dense range the same way.
Dataset load_tu_dataset(const std::filesystem::path& directory, const std::string& name);

/// Writes the layout above (LF endings). Node labels are always written.
/// Binary-multi datasets and missing targets cannot be represented.
void write_tu_dataset(const Dataset& dataset, const std::filesystem::path& directory,
                      const std::string& name);

}  // namespace qgnn
