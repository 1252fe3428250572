#include "nlmi/layers.hpp"

#include <cmath>
#include <sstream>

#include "nlmi/errors.hpp"
#include "nlmi/ops.hpp"

namespace nlmi {

std::string UpdateTerms::to_string() const {
  std::string out;
  const auto add = [&out](const char* t) {
    if (!out.empty()) out += ',';
    out += t;
  };
  if (self) add("self");
  if (message) add("msg");
  if (encoding) add("enc");
  return out;
}

UpdateTerms UpdateTerms::parse(const std::string& text) {
  UpdateTerms t{false, false, false};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    item = first == std::string::npos ? std::string() : item.substr(first, last - first + 1);
    if (item == "self") {
      t.self = true;
    } else if (item == "msg") {
      t.message = true;
    } else if (item == "enc") {
      t.encoding = true;
    } else {
      throw ConfigError("update terms: unknown term '" + item + "' (expected self, msg, enc)");
    }
  }
  if (!t.any()) throw ConfigError("update terms: at least one of self, msg, enc is required");
  return t;
}

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from({fan_in, fan_out}, std::move(v), true);
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  Linear l;
  l.weight = init_weight(in, out, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> b(out);
  for (double& x : b) x = rng.uniform(-bound, bound);
  l.bias = Tensor::from({out}, std::move(b), true);
  return l;
}

Tensor Linear::forward(const Tensor& x) const { return ops::add(ops::matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + "weight", weight});
  out.push_back({prefix + "bias", bias});
}

BatchNorm BatchNorm::init(std::size_t d) {
  BatchNorm bn;
  bn.gamma = Tensor::full({d}, 1.0, true);
  bn.beta = Tensor::zeros({d}, true);
  bn.running_mean = Tensor::zeros({d});
  bn.running_var = Tensor::full({d}, 1.0);
  return bn;
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  Tensor normalized;
  if (mode == Mode::Train) {
    const std::size_t n = x.rows();
    if (n == 0) throw ShapeError("batch norm: empty batch");
    Tensor mu = ops::mean_rows(x);
    Tensor centered = ops::sub(x, mu);
    Tensor var = ops::mean_rows(ops::square(centered));
    normalized = ops::div(centered, ops::sqrt(ops::add_scalar(var, eps)));

    const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
    auto rm = running_mean.data();
    auto rv = running_var.data();
    for (std::size_t j = 0; j < rm.size(); ++j) {
      rm[j] = (1.0 - momentum) * rm[j] + momentum * mu[j];
      rv[j] = (1.0 - momentum) * rv[j] + momentum * var[j] * unbias;
    }
  } else {
    std::vector<double> denom(running_var.numel());
    for (std::size_t j = 0; j < denom.size(); ++j) denom[j] = std::sqrt(running_var[j] + eps);
    normalized = ops::div(ops::sub(x, running_mean), Tensor::from(running_var.shape(), std::move(denom)));
  }
  return ops::add(ops::mul(normalized, gamma), beta);
}

namespace {

void require_width(const Tensor& t, std::size_t d, const char* what) {
  if (t.rank() != 2 || t.cols() != d) {
    throw ShapeError(std::string(what) + ": expected width " + std::to_string(d) + ", got " + shape_str(t.shape()));
  }
}

std::vector<double> inverse_in_degree_per_edge(const Topology& topo) {
  std::vector<double> c(topo.num_edges());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = 1.0 / topo.in_degree[topo.dst[k]];
  return c;
}

Tensor accumulate_terms(const UpdateTerms& terms, const Tensor& self, const Tensor& totals, const Tensor& enc) {
  Tensor acc;
  const auto push = [&acc](const Tensor& t) { acc = acc.defined() ? ops::add(acc, t) : t; };
  if (terms.self) push(self);
  if (terms.message) push(totals);
  if (terms.encoding) push(enc);
  return acc;
}

}  // namespace

Messages gcn_messages(const Tensor& h, const Topology& topo, const Tensor& weight) {
  require_width(h, weight.shape()[0], "gcn_messages");
  if (h.rows() != topo.num_nodes) throw ShapeError("gcn_messages: node count mismatch");
  Tensor projected = ops::matmul(h, weight);
  Tensor per_edge = ops::scale_rows(ops::gather_rows(projected, topo.src), inverse_in_degree_per_edge(topo));
  Tensor totals = ops::segment_sum(per_edge, topo.incoming);
  return {per_edge, totals};
}

Tensor nlmi_encode(const Messages& messages, const Topology& topo, const Linear& fc) {
  const std::size_t d = messages.totals.cols();
  if (fc.in_dim() != 2 * d || fc.out_dim() != d) {
    throw ShapeError("nlmi_encode: fc must map " + std::to_string(2 * d) + " -> " + std::to_string(d) + ", got " +
                     shape_str(fc.weight.shape()));
  }
  Tensor rest = ops::sub(ops::gather_rows(messages.totals, topo.dst), messages.per_edge);
  Tensor per_edge = fc.forward(ops::concat_cols(messages.per_edge, rest));
  return ops::segment_sum(per_edge, topo.incoming);
}

GatedMessages gated_messages(const Tensor& h, const Tensor& e, const Topology& topo, const GatedGcnParams& p) {
  if (!(p.eps > 0.0)) throw ConfigError("gated_messages: eps must be positive");
  const std::size_t d = p.A.shape()[0];
  require_width(h, d, "gated_messages (nodes)");
  require_width(e, d, "gated_messages (edges)");
  if (h.rows() != topo.num_nodes || e.rows() != topo.num_edges()) {
    throw ShapeError("gated_messages: feature rows do not match the graph");
  }
  GatedMessages out;
  out.self_term = ops::matmul(h, p.A);
  Tensor bh = ops::matmul(h, p.B);
  Tensor fh = ops::matmul(h, p.F);
  Tensor ce = ops::matmul(e, p.C);
  out.edge_pre =
      ops::add(ops::add(ops::gather_rows(out.self_term, topo.dst), ops::gather_rows(bh, topo.src)), ce);
  Tensor sig = ops::sigmoid(out.edge_pre);
  Tensor denom = ops::add_scalar(ops::segment_sum(sig, topo.incoming), p.eps);
  out.gates = ops::div(sig, ops::gather_rows(denom, topo.dst));
  out.messages.per_edge = ops::mul(out.gates, ops::gather_rows(fh, topo.src));
  out.messages.totals = ops::segment_sum(out.messages.per_edge, topo.incoming);
  return out;
}

GcnLayer::GcnLayer(std::size_t d, UpdateTerms terms, bool with_encoder, bool residual, Rng& rng)
    : d_(d), terms_(terms), residual_(residual) {
  if (!terms.any()) throw ConfigError("gcn layer: no update terms enabled");
  if (terms.encoding && !with_encoder) throw ConfigError("gcn layer: 'enc' term requires the NLMI encoder");
  weight_ = init_weight(d, d, rng);
  if (terms.self) self_weight_ = init_weight(d, d, rng);
  if (with_encoder) fc_ = Linear::init(2 * d, d, rng);
}

LayerState GcnLayer::forward(const LayerState& in, const Topology& topo, Mode) {
  require_width(in.h, d_, "gcn layer");
  Messages m = gcn_messages(in.h, topo, weight_);
  Tensor self = terms_.self ? ops::matmul(in.h, *self_weight_) : Tensor{};
  Tensor enc = terms_.encoding ? nlmi_encode(m, topo, *fc_) : Tensor{};
  Tensor h = ops::relu(accumulate_terms(terms_, self, m.totals, enc));
  if (residual_) h = ops::add(h, in.h);
  return {h, in.e};
}

void GcnLayer::parameters(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + "W", weight_});
  if (self_weight_) out.push_back({prefix + "A", *self_weight_});
  if (fc_) fc_->collect(prefix + "fc.", out);
}

GatedGcnLayer::GatedGcnLayer(std::size_t d, UpdateTerms terms, bool with_encoder, bool residual, double eps,
                             Rng& rng)
    : d_(d), terms_(terms), residual_(residual) {
  if (!terms.any()) throw ConfigError("gatedgcn layer: no update terms enabled");
  if (terms.encoding && !with_encoder) throw ConfigError("gatedgcn layer: 'enc' term requires the NLMI encoder");
  if (!(eps > 0.0)) throw ConfigError("gatedgcn layer: eps must be positive");
  p_.A = init_weight(d, d, rng);
  p_.B = init_weight(d, d, rng);
  p_.C = init_weight(d, d, rng);
  p_.F = init_weight(d, d, rng);
  if (with_encoder) p_.fc = Linear::init(2 * d, d, rng);
  p_.bn = BatchNorm::init(d);
  p_.eps = eps;
}

LayerState GatedGcnLayer::forward(const LayerState& in, const Topology& topo, Mode mode) {
  if (residual_) {
    require_width(in.h, d_, "gatedgcn layer (residual)");
    require_width(in.e, d_, "gatedgcn layer (residual)");
  }
  GatedMessages g = gated_messages(in.h, in.e, topo, p_);
  Tensor enc = terms_.encoding ? nlmi_encode(g.messages, topo, *p_.fc) : Tensor{};
  Tensor h = ops::relu(p_.bn.forward(accumulate_terms(terms_, g.self_term, g.messages.totals, enc), mode));
  Tensor e = ops::relu(g.edge_pre);
  if (residual_) {
    h = ops::add(h, in.h);
    e = ops::add(e, in.e);
  }
  return {h, e};
}

void GatedGcnLayer::parameters(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + "A", p_.A});
  out.push_back({prefix + "B", p_.B});
  out.push_back({prefix + "C", p_.C});
  out.push_back({prefix + "F", p_.F});
  if (p_.fc) p_.fc->collect(prefix + "fc.", out);
  out.push_back({prefix + "bn.gamma", p_.bn.gamma});
  out.push_back({prefix + "bn.beta", p_.bn.beta});
}

void GatedGcnLayer::buffers(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + "bn.running_mean", p_.bn.running_mean});
  out.push_back({prefix + "bn.running_var", p_.bn.running_var});
}

}  // namespace nlmi
