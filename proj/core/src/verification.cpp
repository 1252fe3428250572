#include "nlmi/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlmi/errors.hpp"
#include "nlmi/gradcheck.hpp"
#include "nlmi/ops.hpp"

namespace nlmi::verify {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Gcn:
      return "gcn";
    case Variant::NlmiGcn:
      return "nlmi-gcn";
    case Variant::GatedGcn:
      return "gatedgcn";
    case Variant::NlmiGatedGcn:
      return "nlmi-gatedgcn";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : all_variants())
    if (to_string(v) == s) return v;
  throw ConfigError("unknown layer variant '" + s + "' (expected gcn, nlmi-gcn, gatedgcn, nlmi-gatedgcn)");
}

std::vector<Variant> all_variants() {
  return {Variant::Gcn, Variant::NlmiGcn, Variant::GatedGcn, Variant::NlmiGatedGcn};
}

ModelConfig config_for(Variant v, std::size_t d, std::size_t layers) {
  ModelConfig c;
  c.base = (v == Variant::Gcn || v == Variant::NlmiGcn) ? BaseKind::Gcn : BaseKind::GatedGcn;
  c.nlmi = v == Variant::NlmiGcn || v == Variant::NlmiGatedGcn;
  c.terms = ModelConfig::default_terms(c.base, c.nlmi);
  c.hidden = d;
  c.layers = layers;
  return c;
}

Graph random_graph(std::size_t n, double p, std::size_t d_in, std::size_t d_e, Rng& rng) {
  Graph g;
  g.num_nodes = n;
  std::vector<double> pair_features;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!rng.bernoulli(p)) continue;
      g.edges.push_back({i, j});
      g.edges.push_back({j, i});
      for (std::size_t k = 0; k < d_e; ++k) pair_features.push_back(rng.normal());
    }
  }
  g.node_features = DenseMatrix(n, d_in);
  for (double& x : g.node_features.values) x = rng.normal();
  if (d_e > 0) {
    DenseMatrix e(g.edges.size(), d_e);
    for (std::size_t pair = 0; pair < g.edges.size() / 2; ++pair) {
      for (std::size_t k = 0; k < d_e; ++k) {
        e(2 * pair, k) = pair_features[pair * d_e + k];
        e(2 * pair + 1, k) = pair_features[pair * d_e + k];
      }
    }
    g.edge_features = std::move(e);
  }
  return g;
}

namespace {

// out[j] = sum_i row[i] * W[i][j]
std::vector<double> row_times(std::span<const double> row, const Tensor& w) {
  const std::size_t in = w.shape()[0], out = w.shape()[1];
  std::vector<double> r(out, 0.0);
  for (std::size_t i = 0; i < in; ++i)
    for (std::size_t j = 0; j < out; ++j) r[j] += row[i] * w.at(i, j);
  return r;
}

std::vector<double> apply_linear(std::span<const double> row, const Linear& l) {
  auto r = row_times(row, l.weight);
  for (std::size_t j = 0; j < r.size(); ++j) r[j] += l.bias[j];
  return r;
}

std::vector<std::vector<std::size_t>> incoming_edges(const Graph& g) {
  std::vector<std::vector<std::size_t>> in(g.num_nodes);
  for (std::size_t k = 0; k < g.edges.size(); ++k) in[g.edges[k].dst].push_back(k);
  for (auto& list : in) {
    std::stable_sort(list.begin(), list.end(),
                     [&g](std::size_t a, std::size_t b) { return g.edges[a].src < g.edges[b].src; });
  }
  return in;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

DenseMatrix naive_gcn_totals(const Graph& g, const DenseMatrix& h, const Tensor& weight) {
  const std::size_t d = weight.shape()[1];
  DenseMatrix totals(g.num_nodes, d);
  const auto in = incoming_edges(g);
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    const double deg = static_cast<double>(in[u].size());
    for (std::size_t k : in[u]) {
      const auto wh = row_times(h.row(g.edges[k].src), weight);
      for (std::size_t j = 0; j < d; ++j) totals(u, j) += (1.0 / deg) * wh[j];
    }
  }
  return totals;
}

DenseMatrix naive_nlmi_encode(const Graph& g, const DenseMatrix& messages, const Linear& fc) {
  const std::size_t d = messages.cols;
  DenseMatrix enc(g.num_nodes, d);
  const auto in = incoming_edges(g);
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    for (std::size_t k : in[u]) {
      std::vector<double> z(2 * d, 0.0);
      for (std::size_t j = 0; j < d; ++j) z[j] = messages(k, j);
      for (std::size_t other : in[u]) {
        if (other == k) continue;
        for (std::size_t j = 0; j < d; ++j) z[d + j] += messages(other, j);
      }
      const auto out = apply_linear(z, fc);
      for (std::size_t j = 0; j < d; ++j) enc(u, j) += out[j];
    }
  }
  return enc;
}

namespace {

NaiveState naive_gcn_layer(const GcnLayer& layer, const Graph& g, const NaiveState& in) {
  const std::size_t n = g.num_nodes, d = layer.width();
  const auto incoming = incoming_edges(g);
  DenseMatrix messages(g.num_edges(), d);
  DenseMatrix totals(n, d);
  for (std::size_t u = 0; u < n; ++u) {
    const double deg = static_cast<double>(incoming[u].size());
    for (std::size_t k : incoming[u]) {
      const auto wh = row_times(in.h.row(g.edges[k].src), layer.weight());
      for (std::size_t j = 0; j < d; ++j) {
        messages(k, j) = (1.0 / deg) * wh[j];
        totals(u, j) += messages(k, j);
      }
    }
  }
  const UpdateTerms& t = layer.terms();
  DenseMatrix enc = t.encoding ? naive_nlmi_encode(g, messages, *layer.encoder()) : DenseMatrix(n, d);
  NaiveState out{DenseMatrix(n, d), in.e};
  for (std::size_t u = 0; u < n; ++u) {
    const auto self = t.self ? row_times(in.h.row(u), *layer.self_weight()) : std::vector<double>(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      bool first = true;
      const auto push = [&](double v) {
        acc = first ? v : acc + v;
        first = false;
      };
      if (t.self) push(self[j]);
      if (t.message) push(totals(u, j));
      if (t.encoding) push(enc(u, j));
      out.h(u, j) = relu(acc) + (layer.residual() ? in.h(u, j) : 0.0);
    }
  }
  return out;
}

NaiveState naive_gated_layer(const GatedGcnLayer& layer, const Graph& g, const NaiveState& in) {
  const std::size_t n = g.num_nodes, m = g.num_edges(), d = layer.width();
  const GatedGcnParams& p = layer.params();
  const auto incoming = incoming_edges(g);

  DenseMatrix pre(m, d), sig(m, d);
  for (std::size_t k = 0; k < m; ++k) {
    const auto ah = row_times(in.h.row(g.edges[k].dst), p.A);
    const auto bh = row_times(in.h.row(g.edges[k].src), p.B);
    const auto ce = row_times(in.e.row(k), p.C);
    for (std::size_t j = 0; j < d; ++j) {
      pre(k, j) = ah[j] + bh[j] + ce[j];
      sig(k, j) = sigmoid(pre(k, j));
    }
  }
  DenseMatrix messages(m, d), totals(n, d);
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<double> denom(d, 0.0);
    for (std::size_t k : incoming[u])
      for (std::size_t j = 0; j < d; ++j) denom[j] += sig(k, j);
    for (std::size_t k : incoming[u]) {
      const auto fh = row_times(in.h.row(g.edges[k].src), p.F);
      for (std::size_t j = 0; j < d; ++j) {
        const double alpha = sig(k, j) / (denom[j] + p.eps);
        messages(k, j) = alpha * fh[j];
        totals(u, j) += messages(k, j);
      }
    }
  }
  const UpdateTerms& t = layer.terms();
  DenseMatrix enc = t.encoding ? naive_nlmi_encode(g, messages, *p.fc) : DenseMatrix(n, d);

  NaiveState out{DenseMatrix(n, d), DenseMatrix(m, d)};
  for (std::size_t u = 0; u < n; ++u) {
    const auto self = row_times(in.h.row(u), p.A);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      bool first = true;
      const auto push = [&](double v) {
        acc = first ? v : acc + v;
        first = false;
      };
      if (t.self) push(self[j]);
      if (t.message) push(totals(u, j));
      if (t.encoding) push(enc(u, j));
      const double normalized =
          (acc - p.bn.running_mean[j]) / std::sqrt(p.bn.running_var[j] + p.bn.eps) * p.bn.gamma[j] + p.bn.beta[j];
      out.h(u, j) = relu(normalized) + (layer.residual() ? in.h(u, j) : 0.0);
    }
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t j = 0; j < d; ++j) out.e(k, j) = relu(pre(k, j)) + (layer.residual() ? in.e(k, j) : 0.0);
  return out;
}

}  // namespace

NaiveState naive_layer_forward(const MessagePassingLayer& layer, const Graph& g, const NaiveState& in) {
  if (const auto* gcn = dynamic_cast<const GcnLayer*>(&layer)) return naive_gcn_layer(*gcn, g, in);
  if (const auto* gated = dynamic_cast<const GatedGcnLayer*>(&layer)) return naive_gated_layer(*gated, g, in);
  throw std::logic_error("naive_layer_forward: unsupported layer type");
}

NaiveState naive_forward_oracle(const Model& model, const Graph& g) {
  const std::size_t d = model.config().hidden;
  NaiveState state{DenseMatrix(g.num_nodes, d), DenseMatrix(g.num_edges(), d)};
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    const auto r = apply_linear(g.node_features.row(u), model.input_embedding());
    std::copy(r.begin(), r.end(), state.h.values.begin() + u * d);
  }
  if (model.edge_embedding()) {
    for (std::size_t k = 0; k < g.num_edges(); ++k) {
      const auto r = apply_linear(g.edge_features->row(k), *model.edge_embedding());
      std::copy(r.begin(), r.end(), state.e.values.begin() + k * d);
    }
  }
  for (std::size_t k = 0; k < model.num_layers(); ++k) state = naive_layer_forward(model.layer(k), g, state);
  return state;
}

DenseMatrix to_dense(const Tensor& t) {
  DenseMatrix m(t.rows(), t.cols());
  std::copy(t.data().begin(), t.data().end(), m.values.begin());
  return m;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double diff = std::abs(a.values[i] - b.values[i]);
    if (std::isnan(diff)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, diff);
  }
  return worst;
}

double max_abs_diff(const Tensor& a, const DenseMatrix& b) { return max_abs_diff(to_dense(a), b); }

namespace {

ForwardResult forward_single(Model& model, const Graph& g) {
  NoGradScope no_grad;
  const Graph* ptr = &g;
  GraphBatch b = batch(std::span<const Graph* const>(&ptr, 1));
  return model.forward(b, Mode::Eval);
}

// Row r of `t` compared with row `perm_row[r]` of `u`.
double permuted_row_diff(const Tensor& t, const Tensor& u, std::span<const std::size_t> perm_row) {
  const std::size_t c = t.cols();
  if (t.rows() != u.rows() || c != u.cols()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) worst = std::max(worst, std::abs(t.at(r, j) - u.at(perm_row[r], j)));
  return worst;
}

std::vector<std::size_t> identity_perm(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  return p;
}

}  // namespace

EquivarianceReport equivariance_harness(Model& model, const Graph& g, std::size_t n_perms, Rng& rng) {
  const ForwardResult ref = forward_single(model, g);
  const bool node_level_predictions = model.config().task == TaskKind::NodeClass;
  const bool edge_level_predictions = model.config().task == TaskKind::EdgePred;
  const auto same_nodes = identity_perm(g.num_nodes);
  const auto same_edges = identity_perm(g.num_edges());
  const auto same_graph = identity_perm(1);

  EquivarianceReport report;
  for (std::size_t trial = 0; trial < n_perms; ++trial) {
    // f(P G) rows are compared against P f(G): node i of G is node perm[i] of P G.
    const auto perm = rng.permutation(g.num_nodes);
    const ForwardResult moved = forward_single(model, permute_nodes(g, perm));
    double dev = std::max(permuted_row_diff(ref.node_embeddings, moved.node_embeddings, perm),
                          permuted_row_diff(ref.edge_embeddings, moved.edge_embeddings, same_edges));
    const auto& pred_perm = node_level_predictions ? perm : edge_level_predictions ? same_edges : same_graph;
    dev = std::max(dev, permuted_row_diff(ref.predictions, moved.predictions, pred_perm));
    report.node_permutation = std::max(report.node_permutation, dev);

    // New edge j is old edge order[j]; so old edge k sits at position inverse[k].
    const auto order = rng.permutation(g.num_edges());
    std::vector<std::size_t> inverse(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) inverse[order[j]] = j;
    const ForwardResult shuffled = forward_single(model, permute_edges(g, order));
    double dev2 = std::max(permuted_row_diff(ref.node_embeddings, shuffled.node_embeddings, same_nodes),
                           permuted_row_diff(ref.edge_embeddings, shuffled.edge_embeddings, inverse));
    const auto& pred_perm2 = node_level_predictions ? same_nodes : edge_level_predictions ? inverse : same_graph;
    dev2 = std::max(dev2, permuted_row_diff(ref.predictions, shuffled.predictions, pred_perm2));
    report.neighbour_order = std::max(report.neighbour_order, dev2);
  }
  return report;
}

Model zero_encoder_twin(const Model& base) {
  ModelConfig cfg = base.config();
  cfg.nlmi = true;
  cfg.terms.encoding = true;
  Rng scratch(0);
  Model twin(cfg, scratch);
  twin.copy_matching(base);
  for (auto& nt : twin.parameters()) {
    if (nt.name.find(".fc.") != std::string::npos) std::fill(nt.tensor.data().begin(), nt.tensor.data().end(), 0.0);
  }
  return twin;
}

double reduction_harness(Model& base, Model& twin, std::span<const Graph> graphs) {
  double worst = 0.0;
  for (const auto& g : graphs) {
    const ForwardResult a = forward_single(base, g);
    const ForwardResult b = forward_single(twin, g);
    worst = std::max({worst, max_abs_diff(a.node_embeddings, to_dense(b.node_embeddings)),
                      max_abs_diff(a.edge_embeddings, to_dense(b.edge_embeddings)),
                      max_abs_diff(a.predictions, to_dense(b.predictions))});
  }
  return worst;
}

std::vector<TensorCheck> gradcheck_layer(Variant variant, std::size_t d, std::size_t n_nodes, std::uint64_t seed,
                                         double h) {
  if (n_nodes < 2) throw ConfigError("gradcheck: need at least 2 nodes");
  if (d == 0) throw ConfigError("gradcheck: width must be positive");
  Rng rng(seed);
  const ModelConfig cfg = config_for(variant, d, 1);

  // Random recursive tree plus extra edges keeps every node reachable.
  Graph g;
  g.num_nodes = n_nodes;
  std::vector<std::vector<bool>> linked(n_nodes, std::vector<bool>(n_nodes, false));
  const auto link = [&](std::size_t a, std::size_t b) {
    if (a == b || linked[a][b]) return;
    linked[a][b] = linked[b][a] = true;
    g.edges.push_back({a, b});
    g.edges.push_back({b, a});
  };
  for (std::size_t i = 1; i < n_nodes; ++i) link(static_cast<std::size_t>(rng.below(i)), i);
  for (std::size_t i = 0; i < n_nodes; ++i)
    for (std::size_t j = i + 1; j < n_nodes; ++j)
      if (rng.bernoulli(0.3)) link(i, j);
  const Topology topo = Topology::from_edges(n_nodes, g.edges);

  std::unique_ptr<MessagePassingLayer> layer;
  if (cfg.base == BaseKind::Gcn) {
    layer = std::make_unique<GcnLayer>(d, cfg.terms, cfg.nlmi, cfg.residual, rng);
  } else {
    layer = std::make_unique<GatedGcnLayer>(d, cfg.terms, cfg.nlmi, cfg.residual, cfg.gate_eps, rng);
  }
  // Non-trivial BN affine parameters and encoder so every path carries signal.
  std::vector<NamedTensor> params;
  layer->parameters("", params);
  for (auto& p : params) {
    if (p.name == "bn.gamma" || p.name == "bn.beta") {
      for (double& x : p.tensor.data()) x = rng.uniform(0.5, 1.5);
    }
  }

  const auto random_tensor = [&rng](Shape s) {
    std::vector<double> v(shape_numel(s));
    for (double& x : v) x = rng.normal();
    return Tensor::from(std::move(s), std::move(v));
  };
  Tensor h_in = random_tensor({n_nodes, d});
  Tensor e_in = random_tensor({g.num_edges(), d});
  const Tensor r_nodes = random_tensor({n_nodes, d});
  const Tensor r_edges = random_tensor({g.num_edges(), d});

  const ScalarFn loss = [&](const Tensor&) {
    LayerState out = layer->forward({h_in, e_in}, topo, Mode::Train);
    return ops::add(ops::sum(ops::mul(out.h, r_nodes)), ops::sum(ops::mul(out.e, r_edges)));
  };

  std::vector<TensorCheck> checks;
  for (auto& p : params) checks.push_back({p.name, finite_diff_check(loss, p.tensor, h)});
  checks.push_back({"input.h", finite_diff_check(loss, h_in, h)});
  checks.push_back({"input.e", finite_diff_check(loss, e_in, h)});
  return checks;
}

}  // namespace nlmi::verify
