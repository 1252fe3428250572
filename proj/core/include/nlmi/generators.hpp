#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nlmi/graph.hpp"
#include "nlmi/rng.hpp"

namespace nlmi::data {

/// Stochastic block model with semi-supervised community hints.
///
/// Nodes are split into contiguous, near-equal blocks (node i belongs to
/// community i * k / n). Each unordered pair is linked with probability
/// p_in inside a block and p_intra across blocks. Node features have width
/// n_communities: `hints_per_community` random members of every community
/// carry the one-hot of their community id, all other rows start at zero,
/// and every entry then receives N(0, feature_noise^2) noise.
struct SbmParams {
  std::size_t n_nodes = 60;
  std::size_t n_communities = 2;
  double p_in = 0.5;
  double p_intra = 0.05;
  double feature_noise = 0.1;
  std::size_t hints_per_community = 1;
  bool operator==(const SbmParams&) const = default;
};

/// Random G(n, p_base) graph with a denser planted subgraph on `pattern_size`
/// randomly chosen nodes (pairs inside it are linked with p_pattern).
/// Features are one-hot node types drawn uniformly from n_types.
struct PatternParams {
  std::size_t n_base = 40;
  std::size_t pattern_size = 10;
  double p_base = 0.1;
  double p_pattern = 0.6;
  std::size_t n_types = 3;
  bool operator==(const PatternParams&) const = default;
};

/// Graph classification: label 1 iff a dense pattern was planted (fair coin).
struct PatternPresenceParams {
  PatternParams pattern;
  bool operator==(const PatternPresenceParams&) const = default;
};

/// Cities uniform in the unit square, symmetric k-nearest-neighbour graph.
struct TspParams {
  std::size_t n_cities = 8;
  std::size_t k_nn = 7;
  bool operator==(const TspParams&) const = default;
};

/// Random connected graph (random recursive tree plus extra edges with p_extra);
/// target = triangles / n + 0.5 * mean degree + N(0, noise_std^2).
struct RegressionParams {
  std::size_t n_min = 8;
  std::size_t n_max = 16;
  double p_extra = 0.15;
  double noise_std = 0.0;
  std::size_t n_types = 3;
  bool operator==(const RegressionParams&) const = default;
};

/// Community id of node i under the contiguous block assignment.
std::size_t sbm_community(std::size_t node, std::size_t n_nodes, std::size_t n_communities);

Graph gen_sbm_communities(const SbmParams& p, Rng& rng);
Graph gen_planted_pattern(const PatternParams& p, Rng& rng);
Graph gen_pattern_presence(const PatternPresenceParams& p, Rng& rng);
Graph gen_tsp_instance(const TspParams& p, Rng& rng);
Graph gen_graph_regression(const RegressionParams& p, Rng& rng);

using Point = std::array<double, 2>;

struct Tour {
  std::vector<std::size_t> order;  // starts at city 0
  double length = 0.0;
};

double tour_length(std::span<const Point> cities, std::span<const std::size_t> order);

/// Exhaustive search over the (n-1)!/2 distinct cycles through city 0.
///
/// Orders are enumerated lexicographically with order[1] < order[n-1] (one
/// direction per cycle); a later tour replaces the incumbent only when it is
/// shorter by more than a relative 1e-12, so among optimal tours the
/// lexicographically smallest one is returned. Requires 3 <= n <= 10.
Tour brute_force_tour(std::span<const Point> cities);

/// k-NN graph with coordinates as node features, distances as edge features and
/// edge label 1 iff the edge lies on brute_force_tour(). Throws ConfigError when
/// the optimal tour uses a pair that is not in the k-NN graph.
Graph tsp_graph_from_points(std::span<const Point> cities, std::size_t k_nn);

std::size_t count_triangles(const Graph& g);

/// triangles / n + 0.5 * (directed edge count / n), without noise.
double regression_target(const Graph& g);

}  // namespace nlmi::data
