#include "nlmi/generators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "nlmi/errors.hpp"

namespace nlmi::data {

namespace {

void link(Graph& g, std::size_t a, std::size_t b) {
  g.edges.push_back({a, b});
  g.edges.push_back({b, a});
}

DenseMatrix one_hot_types(std::size_t n, std::size_t n_types, Rng& rng) {
  DenseMatrix x(n, n_types);
  for (std::size_t i = 0; i < n; ++i) x(i, static_cast<std::size_t>(rng.below(n_types))) = 1.0;
  return x;
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

void validate(const PatternParams& p) {
  if (p.pattern_size < 2 || p.pattern_size >= p.n_base) {
    throw ConfigError("planted pattern: need 2 <= pattern_size < n_base");
  }
  check_probability(p.p_base, "p_base");
  check_probability(p.p_pattern, "p_pattern");
  if (!(p.p_base < p.p_pattern)) throw ConfigError("planted pattern: need p_base < p_pattern");
  if (p.n_types == 0) throw ConfigError("planted pattern: n_types must be positive");
}

}  // namespace

std::size_t sbm_community(std::size_t node, std::size_t n_nodes, std::size_t n_communities) {
  return node * n_communities / n_nodes;
}

Graph gen_sbm_communities(const SbmParams& p, Rng& rng) {
  if (p.n_communities < 2) throw ConfigError("sbm: n_communities must be >= 2");
  if (p.n_nodes < p.n_communities) throw ConfigError("sbm: fewer nodes than communities");
  check_probability(p.p_in, "sbm p_in");
  check_probability(p.p_intra, "sbm p_intra");
  if (!(p.p_intra < p.p_in)) throw ConfigError("sbm: need 0 <= p_intra < p_in <= 1");
  if (p.feature_noise < 0.0) throw ConfigError("sbm: feature_noise must be non-negative");

  const std::size_t n = p.n_nodes, k = p.n_communities;
  Graph g;
  g.num_nodes = n;
  g.node_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.node_labels[i] = static_cast<int>(sbm_community(i, n, k));

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double prob = g.node_labels[i] == g.node_labels[j] ? p.p_in : p.p_intra;
      if (rng.bernoulli(prob)) link(g, i, j);
    }
  }

  g.node_features = DenseMatrix(n, k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (static_cast<std::size_t>(g.node_labels[i]) == c) members.push_back(i);
    rng.shuffle(members);
    const std::size_t hints = std::min(p.hints_per_community, members.size());
    for (std::size_t h = 0; h < hints; ++h) g.node_features(members[h], c) = 1.0;
  }
  if (p.feature_noise > 0.0) {
    for (double& v : g.node_features.values) v += p.feature_noise * rng.normal();
  }
  return g;
}

Graph gen_planted_pattern(const PatternParams& p, Rng& rng) {
  validate(p);
  const std::size_t n = p.n_base;
  Graph g;
  g.num_nodes = n;
  g.node_labels.assign(n, 0);
  auto perm = rng.permutation(n);
  for (std::size_t i = 0; i < p.pattern_size; ++i) g.node_labels[perm[i]] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool inside = g.node_labels[i] == 1 && g.node_labels[j] == 1;
      if (rng.bernoulli(inside ? p.p_pattern : p.p_base)) link(g, i, j);
    }
  }
  g.node_features = one_hot_types(n, p.n_types, rng);
  return g;
}

Graph gen_pattern_presence(const PatternPresenceParams& p, Rng& rng) {
  validate(p.pattern);
  const bool planted = rng.bernoulli(0.5);
  Graph g;
  if (planted) {
    g = gen_planted_pattern(p.pattern, rng);
  } else {
    const std::size_t n = p.pattern.n_base;
    g.num_nodes = n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.bernoulli(p.pattern.p_base)) link(g, i, j);
    g.node_features = one_hot_types(n, p.pattern.n_types, rng);
  }
  g.node_labels.clear();
  g.graph_label = planted ? 1 : 0;
  return g;
}

Graph gen_tsp_instance(const TspParams& p, Rng& rng) {
  if (p.n_cities < 3 || p.n_cities > 10) throw ConfigError("tsp: n_cities must lie in [3, 10]");
  if (p.k_nn == 0 || p.k_nn >= p.n_cities) throw ConfigError("tsp: need 1 <= k_nn < n_cities");
  std::vector<Point> cities(p.n_cities);
  for (auto& c : cities) {
    c[0] = rng.uniform();
    c[1] = rng.uniform();
  }
  return tsp_graph_from_points(cities, p.k_nn);
}

Graph gen_graph_regression(const RegressionParams& p, Rng& rng) {
  if (p.n_min < 2 || p.n_max < p.n_min) throw ConfigError("regression: need 2 <= n_min <= n_max");
  check_probability(p.p_extra, "regression p_extra");
  if (p.noise_std < 0.0) throw ConfigError("regression: noise_std must be non-negative");
  if (p.n_types == 0) throw ConfigError("regression: n_types must be positive");

  const std::size_t n = p.n_min + static_cast<std::size_t>(rng.below(p.n_max - p.n_min + 1));
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 1; i < n; ++i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    pairs.insert({j, i});
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (!pairs.contains({i, j}) && rng.bernoulli(p.p_extra)) pairs.insert({i, j});

  Graph g;
  g.num_nodes = n;
  for (const auto& [a, b] : pairs) link(g, a, b);
  g.node_features = one_hot_types(n, p.n_types, rng);
  double target = regression_target(g);
  if (p.noise_std > 0.0) target += p.noise_std * rng.normal();
  g.graph_target = target;
  return g;
}

std::size_t count_triangles(const Graph& g) {
  const std::size_t n = g.num_nodes;
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (const auto& e : g.edges) {
    if (e.src == e.dst) continue;
    adj[e.src][e.dst] = true;
    adj[e.dst][e.src] = true;
  }
  std::size_t count = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!adj[a][b]) continue;
      for (std::size_t c = b + 1; c < n; ++c)
        if (adj[a][c] && adj[b][c]) ++count;
    }
  return count;
}

double regression_target(const Graph& g) {
  if (g.num_nodes == 0) throw ConfigError("regression target of empty graph");
  const double n = static_cast<double>(g.num_nodes);
  const double mean_degree = static_cast<double>(g.num_edges()) / n;
  return static_cast<double>(count_triangles(g)) / n + 0.5 * mean_degree;
}

}  // namespace nlmi::data
