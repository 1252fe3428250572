#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "nlmi/errors.hpp"
#include "nlmi/generators.hpp"

namespace nlmi::data {

namespace {

double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

double tour_length(std::span<const Point> cities, std::span<const std::size_t> order) {
  double total = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    total += distance(cities[order[i]], cities[order[(i + 1) % order.size()]]);
  }
  return total;
}

Tour brute_force_tour(std::span<const Point> cities) {
  const std::size_t n = cities.size();
  if (n < 3 || n > 10) throw ConfigError("brute_force_tour: need 3 <= n <= 10 cities, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Tour best{order, std::numeric_limits<double>::infinity()};
  do {
    if (order[1] > order[n - 1]) continue;  // reversed duplicate of an earlier cycle
    const double len = tour_length(cities, order);
    if (len < best.length * (1.0 - 1e-12)) best = {order, len};
  } while (std::next_permutation(order.begin() + 1, order.end()));
  return best;
}

Graph tsp_graph_from_points(std::span<const Point> cities, std::size_t k_nn) {
  const std::size_t n = cities.size();
  if (k_nn == 0 || k_nn >= n) throw ConfigError("tsp: need 1 <= k_nn < n_cities");

  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      return distance(cities[i], cities[a]) < distance(cities[i], cities[b]);
    });
    for (std::size_t r = 0; r < k_nn; ++r) pairs.insert({std::min(i, others[r]), std::max(i, others[r])});
  }

  const Tour tour = brute_force_tour(cities);
  std::set<std::pair<std::size_t, std::size_t>> tour_pairs;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = tour.order[i], b = tour.order[(i + 1) % n];
    tour_pairs.insert({std::min(a, b), std::max(a, b)});
  }
  for (const auto& tp : tour_pairs) {
    if (!pairs.contains(tp)) {
      throw ConfigError("tsp: optimal tour edge (" + std::to_string(tp.first) + "," + std::to_string(tp.second) +
                        ") is missing from the " + std::to_string(k_nn) + "-NN graph; raise k_nn");
    }
  }

  Graph g;
  g.num_nodes = n;
  g.node_features = DenseMatrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    g.node_features(i, 0) = cities[i][0];
    g.node_features(i, 1) = cities[i][1];
  }
  std::vector<double> dist;
  for (const auto& [a, b] : pairs) {
    const double d = distance(cities[a], cities[b]);
    const int label = tour_pairs.contains({a, b}) ? 1 : 0;
    g.edges.push_back({a, b});
    g.edges.push_back({b, a});
    dist.push_back(d);
    dist.push_back(d);
    g.edge_labels.push_back(label);
    g.edge_labels.push_back(label);
  }
  g.edge_features = DenseMatrix(g.edges.size(), 1);
  g.edge_features->values = std::move(dist);
  return g;
}

}  // namespace nlmi::data
