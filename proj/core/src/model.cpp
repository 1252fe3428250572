#include "nlmi/model.hpp"

#include <algorithm>
#include <map>

#include "nlmi/errors.hpp"
#include "nlmi/ops.hpp"

namespace nlmi {

std::string to_string(BaseKind b) { return b == BaseKind::Gcn ? "gcn" : "gatedgcn"; }

BaseKind base_from_string(const std::string& s) {
  if (s == "gcn") return BaseKind::Gcn;
  if (s == "gatedgcn") return BaseKind::GatedGcn;
  throw ConfigError("unknown base '" + s + "' (expected gcn or gatedgcn)");
}

UpdateTerms ModelConfig::default_terms(BaseKind base, bool nlmi) {
  UpdateTerms t;
  t.self = base == BaseKind::GatedGcn;
  t.message = true;
  t.encoding = nlmi;
  return t;
}

void ModelConfig::validate() const {
  if (hidden == 0) throw ConfigError("model: hidden width must be positive");
  if (in_dim == 0) throw ConfigError("model: in_dim must be positive");
  if (out_dim == 0) throw ConfigError("model: out_dim must be positive");
  if (!terms.any()) throw ConfigError("model: no update terms enabled");
  if (terms.encoding && !nlmi) throw ConfigError("model: 'enc' term requires nlmi on");
  if (!(gate_eps > 0.0)) throw ConfigError("model: gate_eps must be positive");
  if ((task == TaskKind::EdgePred || task == TaskKind::GraphReg) && out_dim != 1) {
    throw ConfigError("model: edge-pred and graph-reg heads have out_dim 1");
  }
}

std::string ModelConfig::variant_name() const { return (nlmi ? "nlmi-" : "") + to_string(base); }

Json model_config_to_json(const ModelConfig& c) {
  return {{"base", to_string(c.base)},     {"nlmi", c.nlmi},
          {"layers", c.layers},            {"hidden", c.hidden},
          {"in_dim", c.in_dim},            {"edge_in_dim", c.edge_in_dim},
          {"out_dim", c.out_dim},          {"task", to_string(c.task)},
          {"terms", c.terms.to_string()},  {"residual", c.residual},
          {"gate_eps", c.gate_eps}};
}

ModelConfig model_config_from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"base", "nlmi", "layers", "hidden", "in_dim", "edge_in_dim", "out_dim", "task", "terms",
                       "residual", "gate_eps"},
                      "model config");
  ModelConfig c;
  if (j.contains("base")) c.base = base_from_string(j.at("base").get<std::string>());
  if (j.contains("nlmi")) c.nlmi = j.at("nlmi").get<bool>();
  c.terms = ModelConfig::default_terms(c.base, c.nlmi);
  if (j.contains("layers")) c.layers = j.at("layers").get<std::size_t>();
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::size_t>();
  if (j.contains("in_dim")) c.in_dim = j.at("in_dim").get<std::size_t>();
  if (j.contains("edge_in_dim")) c.edge_in_dim = j.at("edge_in_dim").get<std::size_t>();
  if (j.contains("out_dim")) c.out_dim = j.at("out_dim").get<std::size_t>();
  if (j.contains("task")) c.task = task_from_string(j.at("task").get<std::string>());
  if (j.contains("terms")) c.terms = UpdateTerms::parse(j.at("terms").get<std::string>());
  if (j.contains("residual")) c.residual = j.at("residual").get<bool>();
  if (j.contains("gate_eps")) c.gate_eps = j.at("gate_eps").get<double>();
  return c;
}

ModelConfig fit_to_dataset(ModelConfig c, const Dataset& d) {
  const Graph* sample = !d.train.empty() ? &d.train.front() : !d.val.empty() ? &d.val.front()
                                                           : !d.test.empty() ? &d.test.front()
                                                                             : nullptr;
  if (!sample) throw ConfigError("model: dataset has no graphs");
  c.task = d.spec.task();
  c.in_dim = sample->node_features.cols;
  c.edge_in_dim = sample->edge_features ? sample->edge_features->cols : 0;
  if (c.task == TaskKind::NodeClass || c.task == TaskKind::GraphClass) {
    int max_label = 1;
    for (const auto* split : {&d.train, &d.val, &d.test}) {
      for (const auto& g : *split) {
        for (int y : g.node_labels) max_label = std::max(max_label, y);
        if (g.graph_label) max_label = std::max(max_label, *g.graph_label);
      }
    }
    c.out_dim = static_cast<std::size_t>(max_label) + 1;
  } else {
    c.out_dim = 1;
  }
  return c;
}

Mlp Mlp::init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  Mlp m;
  m.hidden = Linear::init(in, hidden, rng);
  m.output = Linear::init(hidden, out, rng);
  return m;
}

Tensor Mlp::forward(const Tensor& x) const { return output.forward(ops::relu(hidden.forward(x))); }

Tensor mean_pool(const Tensor& h, const GraphBatch& batch) {
  std::vector<double> inv(batch.num_graphs());
  for (std::size_t g = 0; g < inv.size(); ++g) {
    const std::size_t n = batch.nodes_by_graph.count(g);
    inv[g] = n ? 1.0 / static_cast<double>(n) : 0.0;
  }
  return ops::scale_rows(ops::segment_sum(h, batch.nodes_by_graph), inv);
}

ReadoutHead ReadoutHead::init(TaskKind task, std::size_t d, std::size_t out, Rng& rng) {
  ReadoutHead head;
  head.task = task;
  const std::size_t in = task == TaskKind::EdgePred ? 2 * d : d;
  const std::size_t hidden = task == TaskKind::EdgePred ? d : std::max<std::size_t>(1, d / 2);
  head.mlp = Mlp::init(in, hidden, out, rng);
  return head;
}

Tensor ReadoutHead::forward(const Tensor& h, const GraphBatch& batch) const {
  switch (task) {
    case TaskKind::NodeClass:
      return mlp.forward(h);
    case TaskKind::GraphClass:
    case TaskKind::GraphReg:
      return mlp.forward(mean_pool(h, batch));
    case TaskKind::EdgePred: {
      const auto& topo = batch.topology;
      return mlp.forward(ops::concat_cols(ops::gather_rows(h, topo.src), ops::gather_rows(h, topo.dst)));
    }
  }
  throw std::logic_error("readout: unknown task");
}

Model::Model(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config_.hidden;
  embed_ = Linear::init(config_.in_dim, d, rng);
  if (config_.edge_in_dim > 0) edge_embed_ = Linear::init(config_.edge_in_dim, d, rng);
  for (std::size_t k = 0; k < config_.layers; ++k) {
    if (config_.base == BaseKind::Gcn) {
      layers_.push_back(std::make_unique<GcnLayer>(d, config_.terms, config_.nlmi, config_.residual, rng));
    } else {
      layers_.push_back(
          std::make_unique<GatedGcnLayer>(d, config_.terms, config_.nlmi, config_.residual, config_.gate_eps, rng));
    }
  }
  head_ = ReadoutHead::init(config_.task, d, config_.out_dim, rng);
}

LayerState Model::embed(const GraphBatch& batch, Mode mode) {
  if (batch.node_features.cols() != config_.in_dim) {
    throw ShapeError("model: node features have width " + std::to_string(batch.node_features.cols()) +
                     ", model expects " + std::to_string(config_.in_dim));
  }
  LayerState state;
  state.h = embed_.forward(batch.node_features);
  if (edge_embed_) {
    if (!batch.edge_features.defined() || batch.edge_features.cols() != config_.edge_in_dim) {
      throw ShapeError("model: edge features missing or of the wrong width");
    }
    state.e = edge_embed_->forward(batch.edge_features);
  } else {
    state.e = Tensor::zeros({batch.num_edges(), config_.hidden});
  }
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    state = layers_[k]->forward(state, batch.topology, mode);
    state.h.check_finite("layer " + std::to_string(k) + " node output");
    state.e.check_finite("layer " + std::to_string(k) + " edge output");
  }
  return state;
}

ForwardResult Model::forward(const GraphBatch& batch, Mode mode) {
  LayerState state = embed(batch, mode);
  Tensor pred = head_.forward(state.h, batch);
  pred.check_finite("readout");
  return {state.h, state.e, pred};
}

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out;
  embed_.collect("embed.", out);
  if (edge_embed_) edge_embed_->collect("edge_embed.", out);
  for (std::size_t k = 0; k < layers_.size(); ++k) layers_[k]->parameters("layers." + std::to_string(k) + ".", out);
  head_.mlp.hidden.collect("head.0.", out);
  head_.mlp.output.collect("head.1.", out);
  return out;
}

std::vector<NamedTensor> Model::buffers() const {
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < layers_.size(); ++k) layers_[k]->buffers("layers." + std::to_string(k) + ".", out);
  return out;
}

std::vector<NamedTensor> Model::state() const {
  auto out = parameters();
  auto b = buffers();
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void Model::load_state(const std::vector<NamedTensor>& state) {
  std::map<std::string, Tensor> mine;
  for (auto& nt : this->state()) mine.emplace(nt.name, nt.tensor);
  for (const auto& nt : state) {
    auto it = mine.find(nt.name);
    if (it == mine.end()) throw FormatError("load_state: unknown tensor '" + nt.name + "'");
    if (it->second.shape() != nt.tensor.shape()) {
      throw FormatError("load_state: tensor '" + nt.name + "' has shape " + shape_str(nt.tensor.shape()) +
                        ", expected " + shape_str(it->second.shape()));
    }
    std::copy(nt.tensor.data().begin(), nt.tensor.data().end(), it->second.data().begin());
  }
}

std::size_t Model::copy_matching(const Model& other) {
  std::map<std::string, Tensor> theirs;
  for (auto& nt : other.state()) theirs.emplace(nt.name, nt.tensor);
  std::size_t copied = 0;
  for (auto& nt : state()) {
    auto it = theirs.find(nt.name);
    if (it == theirs.end() || it->second.shape() != nt.tensor.shape()) continue;
    std::copy(it->second.data().begin(), it->second.data().end(), nt.tensor.data().begin());
    ++copied;
  }
  return copied;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

void Model::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

Model clone_model(const Model& m) {
  Rng scratch(0);
  Model copy(m.config(), scratch);
  copy.load_state(m.state());
  return copy;
}

}  // namespace nlmi
