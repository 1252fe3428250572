#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nlmi/ops.hpp"
#include "nlmi/tensor.hpp"

namespace nlmi {

/// Plain row-major matrix with value semantics, used for stored features.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  Tensor to_tensor() const { return Tensor::from({rows, cols}, values); }

  bool operator==(const DenseMatrix&) const = default;
};

/// Directed edge; messages flow from `src` into `dst`.
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

/// A single graph with optional per-task targets.
///
/// N(u) = { v : (v, u) in edges }. Undirected graphs store both directions.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  DenseMatrix node_features;                  // num_nodes x d_in
  std::optional<DenseMatrix> edge_features;   // num_edges x d_e
  std::vector<int> node_labels;               // node classification
  std::optional<int> graph_label;             // graph classification
  std::optional<double> graph_target;         // graph regression
  std::vector<int> edge_labels;               // edge prediction

  std::size_t num_edges() const { return edges.size(); }

  /// Throws ShapeError when an endpoint or a feature/label table is out of range.
  void validate() const;

  bool operator==(const Graph&) const = default;
};

/// Adds (u, u) for every node lacking one. Edge features of new loops are zero.
/// Opt-in: generated graphs carry no self-loops.
Graph add_self_loops(const Graph& g);

/// Relabels node i as perm[i]; edge storage order is kept.
Graph permute_nodes(const Graph& g, std::span<const std::size_t> perm);

/// Reorders edge storage: new edge j is old edge order[j].
Graph permute_edges(const Graph& g, std::span<const std::size_t> order);

/// Connectivity needed by message passing, with canonical neighbour order.
struct Topology {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::vector<double> in_degree;
  SegmentIndex incoming;  // edges grouped by dst, sorted by src inside each group

  std::size_t num_edges() const { return src.size(); }

  static Topology from_edges(std::size_t num_nodes, std::span<const Edge> edges);
};

/// Block-diagonal union of graphs.
struct GraphBatch {
  std::vector<const Graph*> members;
  std::vector<std::size_t> node_offsets;  // size = graphs + 1
  std::vector<std::size_t> edge_offsets;  // size = graphs + 1
  std::vector<std::size_t> graph_id;      // per node
  Topology topology;
  SegmentIndex nodes_by_graph;            // for mean pooling
  Tensor node_features;
  Tensor edge_features;                   // undefined when the graphs carry none

  std::size_t num_graphs() const { return members.size(); }
  std::size_t num_nodes() const { return topology.num_nodes; }
  std::size_t num_edges() const { return topology.num_edges(); }

  std::vector<int> node_labels() const;
  std::vector<int> graph_labels() const;
  std::vector<double> graph_targets() const;
  std::vector<int> edge_labels() const;
};

/// Graphs must agree on feature widths and on the presence of edge features.
/// The batch refers to the graphs by pointer; they must outlive it.
GraphBatch batch(std::span<const Graph> graphs);
GraphBatch batch(std::span<const Graph* const> graphs);

/// Reconstructs each member graph from the concatenated tables.
std::vector<Graph> unbatch(const GraphBatch& b);

}  // namespace nlmi
