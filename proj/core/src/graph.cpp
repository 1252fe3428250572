#include "nlmi/graph.hpp"

#include <algorithm>
#include <string>

#include "nlmi/errors.hpp"

namespace nlmi {

void Graph::validate() const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].src >= num_nodes || edges[i].dst >= num_nodes) {
      throw ShapeError("graph: edge " + std::to_string(i) + " (" + std::to_string(edges[i].src) + "," +
                       std::to_string(edges[i].dst) + ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
  }
  if (node_features.rows != num_nodes || node_features.values.size() != node_features.rows * node_features.cols) {
    throw ShapeError("graph: node feature table has " + std::to_string(node_features.rows) + " rows for " +
                     std::to_string(num_nodes) + " nodes");
  }
  if (edge_features && edge_features->rows != edges.size()) {
    throw ShapeError("graph: edge feature table has " + std::to_string(edge_features->rows) + " rows for " +
                     std::to_string(edges.size()) + " edges");
  }
  if (!node_labels.empty() && node_labels.size() != num_nodes) throw ShapeError("graph: node label count mismatch");
  if (!edge_labels.empty() && edge_labels.size() != edges.size()) throw ShapeError("graph: edge label count mismatch");
}

Graph add_self_loops(const Graph& g) {
  Graph out = g;
  std::vector<bool> has_loop(g.num_nodes, false);
  for (const auto& e : g.edges)
    if (e.src == e.dst) has_loop[e.src] = true;
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    if (has_loop[u]) continue;
    out.edges.push_back({u, u});
    if (out.edge_features) {
      out.edge_features->values.resize(out.edge_features->values.size() + out.edge_features->cols, 0.0);
      ++out.edge_features->rows;
    }
    if (!out.edge_labels.empty()) out.edge_labels.push_back(0);
  }
  return out;
}

Graph permute_nodes(const Graph& g, std::span<const std::size_t> perm) {
  if (perm.size() != g.num_nodes) throw ShapeError("permute_nodes: permutation size mismatch");
  Graph out = g;
  for (auto& e : out.edges) e = {perm[e.src], perm[e.dst]};
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    auto row = g.node_features.row(i);
    std::copy(row.begin(), row.end(), out.node_features.values.begin() + perm[i] * g.node_features.cols);
    if (!g.node_labels.empty()) out.node_labels[perm[i]] = g.node_labels[i];
  }
  return out;
}

Graph permute_edges(const Graph& g, std::span<const std::size_t> order) {
  if (order.size() != g.num_edges()) throw ShapeError("permute_edges: order size mismatch");
  Graph out = g;
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.edges[j] = g.edges[order[j]];
    if (g.edge_features) {
      auto row = g.edge_features->row(order[j]);
      std::copy(row.begin(), row.end(), out.edge_features->values.begin() + j * g.edge_features->cols);
    }
    if (!g.edge_labels.empty()) out.edge_labels[j] = g.edge_labels[order[j]];
  }
  return out;
}

Topology Topology::from_edges(std::size_t num_nodes, std::span<const Edge> edges) {
  Topology t;
  t.num_nodes = num_nodes;
  t.src.reserve(edges.size());
  t.dst.reserve(edges.size());
  t.in_degree.assign(num_nodes, 0.0);
  for (const auto& e : edges) {
    if (e.src >= num_nodes || e.dst >= num_nodes) throw ShapeError("topology: edge endpoint out of range");
    t.src.push_back(e.src);
    t.dst.push_back(e.dst);
    t.in_degree[e.dst] += 1.0;
  }
  t.incoming = SegmentIndex::build(num_nodes, t.dst, t.src);
  return t;
}

GraphBatch batch(std::span<const Graph> graphs) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const auto& g : graphs) ptrs.push_back(&g);
  return batch(std::span<const Graph* const>(ptrs));
}

GraphBatch batch(std::span<const Graph* const> graphs) {
  if (graphs.empty()) throw ShapeError("batch: no graphs");
  GraphBatch b;
  b.members.assign(graphs.begin(), graphs.end());
  const std::size_t d_in = graphs.front()->node_features.cols;
  const bool has_edge_features = graphs.front()->edge_features.has_value();
  const std::size_t d_e = has_edge_features ? graphs.front()->edge_features->cols : 0;

  b.node_offsets.push_back(0);
  b.edge_offsets.push_back(0);
  for (const Graph* g : graphs) {
    if (g->node_features.cols != d_in) throw ShapeError("batch: node feature widths differ");
    if (g->edge_features.has_value() != has_edge_features || (has_edge_features && g->edge_features->cols != d_e)) {
      throw ShapeError("batch: edge feature layouts differ");
    }
    b.node_offsets.push_back(b.node_offsets.back() + g->num_nodes);
    b.edge_offsets.push_back(b.edge_offsets.back() + g->num_edges());
  }
  const std::size_t n = b.node_offsets.back();
  const std::size_t m = b.edge_offsets.back();

  std::vector<Edge> edges;
  edges.reserve(m);
  std::vector<double> x;
  x.reserve(n * d_in);
  std::vector<double> e;
  e.reserve(m * d_e);
  b.graph_id.reserve(n);
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = *graphs[gi];
    g.validate();
    const std::size_t off = b.node_offsets[gi];
    for (const auto& edge : g.edges) edges.push_back({edge.src + off, edge.dst + off});
    x.insert(x.end(), g.node_features.values.begin(), g.node_features.values.end());
    if (has_edge_features) e.insert(e.end(), g.edge_features->values.begin(), g.edge_features->values.end());
    b.graph_id.insert(b.graph_id.end(), g.num_nodes, gi);
  }
  b.topology = Topology::from_edges(n, edges);
  std::vector<std::size_t> node_ids(n);
  for (std::size_t i = 0; i < n; ++i) node_ids[i] = i;
  b.nodes_by_graph = SegmentIndex::build(graphs.size(), b.graph_id, node_ids);
  b.node_features = Tensor::from({n, d_in}, std::move(x));
  if (has_edge_features) b.edge_features = Tensor::from({m, d_e}, std::move(e));
  return b;
}

std::vector<Graph> unbatch(const GraphBatch& b) {
  std::vector<Graph> out;
  out.reserve(b.num_graphs());
  const std::size_t d_in = b.node_features.cols();
  const bool has_e = b.edge_features.defined();
  const std::size_t d_e = has_e ? b.edge_features.cols() : 0;
  for (std::size_t gi = 0; gi < b.num_graphs(); ++gi) {
    const Graph& ref = *b.members[gi];
    const std::size_t n0 = b.node_offsets[gi], n1 = b.node_offsets[gi + 1];
    const std::size_t e0 = b.edge_offsets[gi], e1 = b.edge_offsets[gi + 1];
    Graph g;
    g.num_nodes = n1 - n0;
    for (std::size_t k = e0; k < e1; ++k) g.edges.push_back({b.topology.src[k] - n0, b.topology.dst[k] - n0});
    g.node_features = DenseMatrix(g.num_nodes, d_in);
    auto xv = b.node_features.data();
    std::copy(xv.begin() + n0 * d_in, xv.begin() + n1 * d_in, g.node_features.values.begin());
    if (has_e) {
      g.edge_features = DenseMatrix(e1 - e0, d_e);
      auto ev = b.edge_features.data();
      std::copy(ev.begin() + e0 * d_e, ev.begin() + e1 * d_e, g.edge_features->values.begin());
    }
    g.node_labels = ref.node_labels;
    g.graph_label = ref.graph_label;
    g.graph_target = ref.graph_target;
    g.edge_labels = ref.edge_labels;
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<int> GraphBatch::node_labels() const {
  std::vector<int> out;
  out.reserve(num_nodes());
  for (const Graph* g : members) out.insert(out.end(), g->node_labels.begin(), g->node_labels.end());
  return out;
}

std::vector<int> GraphBatch::graph_labels() const {
  std::vector<int> out;
  for (const Graph* g : members) out.push_back(g->graph_label.value_or(-1));
  return out;
}

std::vector<double> GraphBatch::graph_targets() const {
  std::vector<double> out;
  for (const Graph* g : members) out.push_back(g->graph_target.value_or(0.0));
  return out;
}

std::vector<int> GraphBatch::edge_labels() const {
  std::vector<int> out;
  out.reserve(num_edges());
  for (const Graph* g : members) out.insert(out.end(), g->edge_labels.begin(), g->edge_labels.end());
  return out;
}

}  // namespace nlmi
