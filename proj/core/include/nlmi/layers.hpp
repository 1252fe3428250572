#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nlmi/graph.hpp"
#include "nlmi/rng.hpp"
#include "nlmi/tensor.hpp"

namespace nlmi {

enum class Mode { Train, Eval };

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Which terms are summed before the node nonlinearity: the self term A*h_u,
/// the aggregated message m_N(u) and the aggregated encoding enc_N(u).
/// Terms are always accumulated in that order.
struct UpdateTerms {
  bool self = true;
  bool message = true;
  bool encoding = false;

  bool any() const { return self || message || encoding; }
  /// Comma separated subset of "self,msg,enc".
  std::string to_string() const;
  static UpdateTerms parse(const std::string& text);
  bool operator==(const UpdateTerms&) const = default;
};

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights of shape [fan_in x fan_out].
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// y = x * weight + bias, weight [in x out], bias [out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight.shape()[0]; }
  std::size_t out_dim() const { return weight.shape()[1]; }
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Per-feature batch normalization over the rows of a [N x d] input.
///
/// Train mode normalizes with the biased batch variance and folds the batch
/// mean and unbiased variance into the running statistics with `momentum`.
/// Eval mode uses only the running statistics.
struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNorm init(std::size_t d);
  Tensor forward(const Tensor& x, Mode mode);
};

/// Per-edge and per-node messages of one layer.
struct Messages {
  Tensor per_edge;  // m_{v->u}, [E x d]
  Tensor totals;    // m_N(u), [N x d]
};

/// Basic GCN messages m_{v->u} = W h_v / |N(u)| summed per destination.
/// Nodes without incoming edges get a zero total.
Messages gcn_messages(const Tensor& h, const Topology& topo, const Tensor& weight);

/// enc_N(u) = sum_{v in N(u)} fc([m_{v->u}, m_N(u) - m_{v->u}]).
/// fc must map 2d -> d; nodes without incoming edges get zero.
Tensor nlmi_encode(const Messages& messages, const Topology& topo, const Linear& fc);

struct GatedGcnParams {
  Tensor A, B, C, F;  // [d x d]
  std::optional<Linear> fc;
  BatchNorm bn;
  double eps = 1e-6;
};

struct GatedMessages {
  Messages messages;
  Tensor gates;       // alpha_{vu}, [E x d]
  Tensor edge_pre;    // e'_{vu} = A h_u + B h_v + C e_vu, [E x d]
  Tensor self_term;   // A h_u, [N x d]
};

/// Edge-gated messages m_{v->u} = alpha_{vu} (.) F h_v with
/// alpha_{vu} = sigmoid(e'_{vu}) / (sum_{w in N(u)} sigmoid(e'_{wu}) + eps).
GatedMessages gated_messages(const Tensor& h, const Tensor& e, const Topology& topo, const GatedGcnParams& p);

/// Node and edge features flowing between message-passing layers.
struct LayerState {
  Tensor h;  // [N x d]
  Tensor e;  // [E x d]
};

class MessagePassingLayer {
 public:
  virtual ~MessagePassingLayer() = default;
  virtual LayerState forward(const LayerState& in, const Topology& topo, Mode mode) = 0;
  virtual std::size_t width() const = 0;
  virtual void parameters(const std::string& prefix, std::vector<NamedTensor>& out) const = 0;
  virtual void buffers(const std::string& prefix, std::vector<NamedTensor>& out) const = 0;
};

/// h' = ReLU(sum of active terms) [+ h], terms from {A h_u, m_N(u), enc_N(u)}.
/// Edge features pass through unchanged.
class GcnLayer final : public MessagePassingLayer {
 public:
  GcnLayer(std::size_t d, UpdateTerms terms, bool with_encoder, bool residual, Rng& rng);

  LayerState forward(const LayerState& in, const Topology& topo, Mode mode) override;
  std::size_t width() const override { return d_; }
  void parameters(const std::string& prefix, std::vector<NamedTensor>& out) const override;
  void buffers(const std::string&, std::vector<NamedTensor>&) const override {}

  const UpdateTerms& terms() const { return terms_; }
  bool residual() const { return residual_; }
  const Tensor& weight() const { return weight_; }
  const std::optional<Tensor>& self_weight() const { return self_weight_; }
  const std::optional<Linear>& encoder() const { return fc_; }

 private:
  std::size_t d_;
  UpdateTerms terms_;
  bool residual_;
  Tensor weight_;
  std::optional<Tensor> self_weight_;
  std::optional<Linear> fc_;
};

/// h' = ReLU(BN(sum of active terms)) [+ h];  e_out = ReLU(e') + e.
class GatedGcnLayer final : public MessagePassingLayer {
 public:
  GatedGcnLayer(std::size_t d, UpdateTerms terms, bool with_encoder, bool residual, double eps, Rng& rng);

  LayerState forward(const LayerState& in, const Topology& topo, Mode mode) override;
  std::size_t width() const override { return d_; }
  void parameters(const std::string& prefix, std::vector<NamedTensor>& out) const override;
  void buffers(const std::string& prefix, std::vector<NamedTensor>& out) const override;

  const UpdateTerms& terms() const { return terms_; }
  bool residual() const { return residual_; }
  const GatedGcnParams& params() const { return p_; }

 private:
  std::size_t d_;
  UpdateTerms terms_;
  bool residual_;
  GatedGcnParams p_;
};

}  // namespace nlmi
