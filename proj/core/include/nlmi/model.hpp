#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "nlmi/dataset.hpp"
#include "nlmi/graph.hpp"
#include "nlmi/json_io.hpp"
#include "nlmi/layers.hpp"

namespace nlmi {

enum class BaseKind { Gcn, GatedGcn };

std::string to_string(BaseKind b);
BaseKind base_from_string(const std::string& s);

struct ModelConfig {
  BaseKind base = BaseKind::GatedGcn;
  bool nlmi = true;
  std::size_t layers = 4;
  std::size_t hidden = 16;
  std::size_t in_dim = 1;
  std::size_t edge_in_dim = 0;  // 0: the task has no edge features
  std::size_t out_dim = 1;      // classes, or 1 for edge scores / regression
  TaskKind task = TaskKind::NodeClass;
  UpdateTerms terms = default_terms(BaseKind::GatedGcn, true);
  bool residual = true;
  double gate_eps = 1e-6;

  /// GCN: msg (+enc); GatedGCN: self,msg (+enc).
  static UpdateTerms default_terms(BaseKind base, bool nlmi);

  /// Throws ConfigError on inconsistent settings.
  void validate() const;

  /// Short identifier: "gcn", "nlmi-gcn", "gatedgcn" or "nlmi-gatedgcn".
  std::string variant_name() const;

  bool operator==(const ModelConfig&) const = default;
};

Json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

/// Input widths and output width a dataset implies for a model.
ModelConfig fit_to_dataset(ModelConfig c, const Dataset& d);

struct ForwardResult {
  Tensor node_embeddings;  // after the last message-passing layer, [N x d]
  Tensor edge_embeddings;  // [E x d]
  Tensor predictions;      // node logits [N x C], graph logits [G x C] / values [G x 1], edge logits [E x 1]
};

/// Two-layer perceptron in -> hidden -> out with ReLU in between.
struct Mlp {
  Linear hidden;
  Linear output;

  static Mlp init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

/// Task head on top of the final embeddings.
///
/// node-class: MLP per node. graph-class / graph-reg: mean pooling over each
/// graph's nodes, then MLP. edge-pred: MLP on [h_src, h_dst] for every stored
/// edge (src first).
struct ReadoutHead {
  TaskKind task = TaskKind::NodeClass;
  Mlp mlp;

  static ReadoutHead init(TaskKind task, std::size_t d, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& h, const GraphBatch& batch) const;
};

/// Mean of each graph's node rows: [N x d] -> [G x d].
Tensor mean_pool(const Tensor& h, const GraphBatch& batch);

/// Input embedding, K message-passing layers and a readout head.
class Model {
 public:
  Model(const ModelConfig& config, Rng& rng);

  const ModelConfig& config() const { return config_; }

  /// Input embedding plus every layer; NumericalError names the first layer
  /// whose output is not finite.
  LayerState embed(const GraphBatch& batch, Mode mode);
  ForwardResult forward(const GraphBatch& batch, Mode mode);

  std::vector<NamedTensor> parameters() const;
  std::vector<NamedTensor> buffers() const;
  /// Parameters followed by buffers.
  std::vector<NamedTensor> state() const;

  /// Copies values by name; every tensor in `state` must exist with the same shape.
  void load_state(const std::vector<NamedTensor>& state);
  /// Copies every tensor present in both models (by name and shape); returns the count.
  std::size_t copy_matching(const Model& other);

  std::size_t num_layers() const { return layers_.size(); }
  MessagePassingLayer& layer(std::size_t k) { return *layers_[k]; }
  const MessagePassingLayer& layer(std::size_t k) const { return *layers_[k]; }
  const Linear& input_embedding() const { return embed_; }
  const std::optional<Linear>& edge_embedding() const { return edge_embed_; }
  std::size_t parameter_count() const;

  void zero_grad();

 private:
  ModelConfig config_;
  Linear embed_;
  std::optional<Linear> edge_embed_;
  std::vector<std::unique_ptr<MessagePassingLayer>> layers_;
  ReadoutHead head_;
};

/// Deep copy with identical parameters and buffers.
Model clone_model(const Model& m);

}  // namespace nlmi
