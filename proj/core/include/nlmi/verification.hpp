#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nlmi/graph.hpp"
#include "nlmi/model.hpp"
#include "nlmi/rng.hpp"

// Reference implementations and property harnesses used by the tests, the
// acceptance suite and `nlmi gradcheck`. The oracles deliberately avoid the
// tensor ops: plain loops over u in V and v in N(u) on DenseMatrix values.

namespace nlmi::verify {

enum class Variant { Gcn, NlmiGcn, GatedGcn, NlmiGatedGcn };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::vector<Variant> all_variants();
ModelConfig config_for(Variant v, std::size_t d, std::size_t layers);

/// Undirected G(n, p) graph (both directions stored, no self-loops) with
/// N(0,1) node features of width d_in and, if d_e > 0, edge features of width
/// d_e (equal for both directions of a pair). Isolated nodes are allowed.
Graph random_graph(std::size_t n, double p, std::size_t d_in, std::size_t d_e, Rng& rng);

/// Naive GCN aggregation: m_N(u) = sum over v in N(u) of W h_v / |N(u)|.
DenseMatrix naive_gcn_totals(const Graph& g, const DenseMatrix& h, const Tensor& weight);

/// Naive NLMI encoding: for every u and v in N(u), the rest-sum is rebuilt as
/// sum over a in N(u), a != v (edge-wise) of m_{a->u}, never by subtraction.
/// `messages` holds m_{v->u} per stored edge.
DenseMatrix naive_nlmi_encode(const Graph& g, const DenseMatrix& messages, const Linear& fc);

struct NaiveState {
  DenseMatrix h;
  DenseMatrix e;
};

/// Eval-mode forward of one message-passing layer by nested loops.
NaiveState naive_layer_forward(const MessagePassingLayer& layer, const Graph& g, const NaiveState& in);

/// Eval-mode forward of the model's input embedding and all layers.
NaiveState naive_forward_oracle(const Model& model, const Graph& g);

/// Max |a - b| over all entries; +inf on a shape mismatch.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double max_abs_diff(const Tensor& a, const DenseMatrix& b);
DenseMatrix to_dense(const Tensor& t);

struct EquivarianceReport {
  double node_permutation = 0.0;  // max |P f(G) - f(P G)| over node and edge outputs
  double neighbour_order = 0.0;   // max deviation after shuffling edge storage
  double max() const { return node_permutation > neighbour_order ? node_permutation : neighbour_order; }
};

/// Applies `n_perms` random node relabelings and edge-storage shuffles and
/// compares final node/edge embeddings and predictions against the
/// unpermuted run. Eval mode.
EquivarianceReport equivariance_harness(Model& model, const Graph& g, std::size_t n_perms, Rng& rng);

/// Copy of `base` with the NLMI encoder enabled and every fc weight and bias zero.
Model zero_encoder_twin(const Model& base);

/// Max |base - twin| over node embeddings, edge embeddings and predictions,
/// eval mode, graph by graph.
double reduction_harness(Model& base, Model& twin, std::span<const Graph> graphs);

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
};

/// Finite-difference check of one freshly initialized layer of `variant` on a
/// random connected graph with `n_nodes` nodes: every parameter tensor plus
/// the node and edge inputs, train mode, loss = sum(h' * R) + sum(e' * S)
/// with fixed random R, S.
std::vector<TensorCheck> gradcheck_layer(Variant variant, std::size_t d, std::size_t n_nodes, std::uint64_t seed,
                                         double h = 1e-5);

}  // namespace nlmi::verify
