#include "nlmi/dataset.hpp"

#include <fstream>
#include <sstream>

#include "nlmi/errors.hpp"

namespace nlmi {

void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& context) {
  if (!obj.is_object()) throw ConfigError(context + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(context + ": unknown key '" + key + "'");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
  if (!out) throw FormatError("write to '" + path + "' failed");
}

std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::NodeClass:
      return "node-class";
    case TaskKind::GraphClass:
      return "graph-class";
    case TaskKind::EdgePred:
      return "edge-pred";
    case TaskKind::GraphReg:
      return "graph-reg";
  }
  return "?";
}

TaskKind task_from_string(const std::string& s) {
  if (s == "node-class") return TaskKind::NodeClass;
  if (s == "graph-class") return TaskKind::GraphClass;
  if (s == "edge-pred") return TaskKind::EdgePred;
  if (s == "graph-reg") return TaskKind::GraphReg;
  throw ConfigError("unknown task kind '" + s + "'");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "'");
}

TaskKind DatasetSpec::task() const {
  struct Visitor {
    TaskKind operator()(const data::SbmParams&) const { return TaskKind::NodeClass; }
    TaskKind operator()(const data::PatternParams&) const { return TaskKind::NodeClass; }
    TaskKind operator()(const data::PatternPresenceParams&) const { return TaskKind::GraphClass; }
    TaskKind operator()(const data::TspParams&) const { return TaskKind::EdgePred; }
    TaskKind operator()(const data::RegressionParams&) const { return TaskKind::GraphReg; }
  };
  return std::visit(Visitor{}, generator);
}

std::string DatasetSpec::generator_name() const {
  struct Visitor {
    std::string operator()(const data::SbmParams&) const { return "sbm"; }
    std::string operator()(const data::PatternParams&) const { return "planted"; }
    std::string operator()(const data::PatternPresenceParams&) const { return "pattern-presence"; }
    std::string operator()(const data::TspParams&) const { return "tsp"; }
    std::string operator()(const data::RegressionParams&) const { return "regression"; }
  };
  return std::visit(Visitor{}, generator);
}

const std::vector<Graph>& Dataset::split(Split s) const {
  switch (s) {
    case Split::Train:
      return train;
    case Split::Val:
      return val;
    case Split::Test:
      return test;
  }
  return train;
}

Graph generate_graph(const GeneratorParams& params, Rng& rng) {
  return std::visit(
      [&rng](const auto& p) -> Graph {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, data::SbmParams>) return data::gen_sbm_communities(p, rng);
        if constexpr (std::is_same_v<P, data::PatternParams>) return data::gen_planted_pattern(p, rng);
        if constexpr (std::is_same_v<P, data::PatternPresenceParams>) return data::gen_pattern_presence(p, rng);
        if constexpr (std::is_same_v<P, data::TspParams>) return data::gen_tsp_instance(p, rng);
        if constexpr (std::is_same_v<P, data::RegressionParams>) return data::gen_graph_regression(p, rng);
      },
      params);
}

Dataset generate_dataset(const DatasetSpec& spec) {
  Dataset d;
  d.spec = spec;
  const auto fill = [&](std::vector<Graph>& out, std::size_t count, std::string_view tag) {
    Rng rng(derive_seed(spec.seed, tag));
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_graph(spec.generator, rng));
  };
  fill(d.train, spec.train, "train");
  fill(d.val, spec.val, "val");
  fill(d.test, spec.test, "test");
  return d;
}

namespace {

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json pattern_to_json(const data::PatternParams& p) {
  return {{"n_base", p.n_base},
          {"pattern_size", p.pattern_size},
          {"p_base", p.p_base},
          {"p_pattern", p.p_pattern},
          {"n_types", p.n_types}};
}

data::PatternParams pattern_from_json(const Json& j, const std::string& ctx) {
  reject_unknown_keys(j, {"n_base", "pattern_size", "p_base", "p_pattern", "n_types"}, ctx);
  data::PatternParams p;
  read_opt(j, "n_base", p.n_base);
  read_opt(j, "pattern_size", p.pattern_size);
  read_opt(j, "p_base", p.p_base);
  read_opt(j, "p_pattern", p.p_pattern);
  read_opt(j, "n_types", p.n_types);
  return p;
}

Json params_to_json(const GeneratorParams& g) {
  return std::visit(
      [](const auto& p) -> Json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, data::SbmParams>) {
          return {{"n_nodes", p.n_nodes},
                  {"n_communities", p.n_communities},
                  {"p_in", p.p_in},
                  {"p_intra", p.p_intra},
                  {"feature_noise", p.feature_noise},
                  {"hints_per_community", p.hints_per_community}};
        } else if constexpr (std::is_same_v<P, data::PatternParams>) {
          return pattern_to_json(p);
        } else if constexpr (std::is_same_v<P, data::PatternPresenceParams>) {
          return pattern_to_json(p.pattern);
        } else if constexpr (std::is_same_v<P, data::TspParams>) {
          return {{"n_cities", p.n_cities}, {"k_nn", p.k_nn}};
        } else {
          return {{"n_min", p.n_min},
                  {"n_max", p.n_max},
                  {"p_extra", p.p_extra},
                  {"noise_std", p.noise_std},
                  {"n_types", p.n_types}};
        }
      },
      g);
}

GeneratorParams params_from_json(const std::string& name, const Json& j) {
  const std::string ctx = "dataset params (" + name + ")";
  if (name == "sbm") {
    reject_unknown_keys(j, {"n_nodes", "n_communities", "p_in", "p_intra", "feature_noise", "hints_per_community"},
                        ctx);
    data::SbmParams p;
    read_opt(j, "n_nodes", p.n_nodes);
    read_opt(j, "n_communities", p.n_communities);
    read_opt(j, "p_in", p.p_in);
    read_opt(j, "p_intra", p.p_intra);
    read_opt(j, "feature_noise", p.feature_noise);
    read_opt(j, "hints_per_community", p.hints_per_community);
    return p;
  }
  if (name == "planted") return pattern_from_json(j, ctx);
  if (name == "pattern-presence") return data::PatternPresenceParams{pattern_from_json(j, ctx)};
  if (name == "tsp") {
    reject_unknown_keys(j, {"n_cities", "k_nn"}, ctx);
    data::TspParams p;
    read_opt(j, "n_cities", p.n_cities);
    read_opt(j, "k_nn", p.k_nn);
    return p;
  }
  if (name == "regression") {
    reject_unknown_keys(j, {"n_min", "n_max", "p_extra", "noise_std", "n_types"}, ctx);
    data::RegressionParams p;
    read_opt(j, "n_min", p.n_min);
    read_opt(j, "n_max", p.n_max);
    read_opt(j, "p_extra", p.p_extra);
    read_opt(j, "noise_std", p.noise_std);
    read_opt(j, "n_types", p.n_types);
    return p;
  }
  throw ConfigError("unknown generator '" + name + "'");
}

Json matrix_to_json(const DenseMatrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

DenseMatrix matrix_from_json(const Json& j, std::size_t expected_rows, const char* what) {
  if (!j.is_array() || j.size() != expected_rows) {
    throw FormatError(std::string("graph: '") + what + "' must be an array of " + std::to_string(expected_rows) +
                      " rows");
  }
  DenseMatrix m;
  m.rows = expected_rows;
  m.cols = expected_rows ? j.front().size() : 0;
  m.values.reserve(m.rows * m.cols);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != m.cols) throw FormatError(std::string("graph: ragged '") + what + "'");
    for (const auto& v : row) m.values.push_back(v.get<double>());
  }
  return m;
}

}  // namespace

Json spec_to_json(const DatasetSpec& spec) {
  return {{"task", to_string(spec.task())},
          {"generator", spec.generator_name()},
          {"params", params_to_json(spec.generator)},
          {"train", spec.train},
          {"val", spec.val},
          {"test", spec.test},
          {"seed", spec.seed}};
}

DatasetSpec spec_from_json(const Json& j) {
  reject_unknown_keys(j, {"task", "generator", "params", "train", "val", "test", "seed"}, "dataset spec");
  if (!j.contains("generator")) throw ConfigError("dataset spec: missing 'generator'");
  DatasetSpec spec;
  spec.generator = params_from_json(j.at("generator").get<std::string>(), j.value("params", Json::object()));
  read_opt(j, "train", spec.train);
  read_opt(j, "val", spec.val);
  read_opt(j, "test", spec.test);
  read_opt(j, "seed", spec.seed);
  if (j.contains("task") && task_from_string(j.at("task").get<std::string>()) != spec.task()) {
    throw ConfigError("dataset spec: task '" + j.at("task").get<std::string>() + "' does not match generator '" +
                      spec.generator_name() + "'");
  }
  return spec;
}

Json graph_to_json(const Graph& g, TaskKind task) {
  Json j;
  j["n"] = g.num_nodes;
  Json edges = Json::array();
  for (const auto& e : g.edges) edges.push_back({e.src, e.dst});
  j["edges"] = std::move(edges);
  j["x"] = matrix_to_json(g.node_features);
  if (g.edge_features) j["e"] = matrix_to_json(*g.edge_features);
  switch (task) {
    case TaskKind::NodeClass:
      j["y"] = g.node_labels;
      break;
    case TaskKind::GraphClass:
      j["y"] = g.graph_label.value_or(0);
      break;
    case TaskKind::EdgePred:
      j["y"] = g.edge_labels;
      break;
    case TaskKind::GraphReg:
      j["y"] = g.graph_target.value_or(0.0);
      break;
  }
  return j;
}

Graph graph_from_json(const Json& j, TaskKind task) {
  if (!j.is_object() || !j.contains("n") || !j.contains("edges") || !j.contains("x") || !j.contains("y")) {
    throw FormatError("graph: expected object with n, edges, x, y");
  }
  Graph g;
  g.num_nodes = j.at("n").get<std::size_t>();
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw FormatError("graph: edges must be [src, dst] pairs");
    g.edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
  }
  g.node_features = matrix_from_json(j.at("x"), g.num_nodes, "x");
  if (j.contains("e")) g.edge_features = matrix_from_json(j.at("e"), g.edges.size(), "e");
  const Json& y = j.at("y");
  switch (task) {
    case TaskKind::NodeClass:
      g.node_labels = y.get<std::vector<int>>();
      break;
    case TaskKind::GraphClass:
      g.graph_label = y.get<int>();
      break;
    case TaskKind::EdgePred:
      g.edge_labels = y.get<std::vector<int>>();
      break;
    case TaskKind::GraphReg:
      g.graph_target = y.get<double>();
      break;
  }
  try {
    g.validate();
  } catch (const ShapeError& e) {
    throw FormatError(e.what());
  }
  return g;
}

std::string dataset_to_string(const Dataset& d) {
  const TaskKind task = d.spec.task();
  Json splits;
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    Json arr = Json::array();
    for (const auto& g : d.split(s)) arr.push_back(graph_to_json(g, task));
    splits[to_string(s)] = std::move(arr);
  }
  Json root = {{"version", kDatasetFormatVersion}, {"spec", spec_to_json(d.spec)}, {"splits", std::move(splits)}};
  return root.dump() + "\n";
}

Dataset dataset_from_string(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("dataset: malformed JSON: ") + e.what());
  }
  try {
    if (!root.is_object() || !root.contains("spec") || !root.contains("splits")) {
      throw FormatError("dataset: expected top-level {version, spec, splits}");
    }
    const int version = root.value("version", 0);
    if (version != kDatasetFormatVersion) {
      throw FormatError("dataset: format version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kDatasetFormatVersion) + ")");
    }
    Dataset d;
    d.spec = spec_from_json(root.at("spec"));
    const TaskKind task = d.spec.task();
    const Json& splits = root.at("splits");
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
      auto& out = s == Split::Train ? d.train : s == Split::Val ? d.val : d.test;
      for (const auto& gj : splits.at(to_string(s))) out.push_back(graph_from_json(gj, task));
    }
    return d;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
}

void save_dataset(const Dataset& d, const std::string& path) { write_text_file(path, dataset_to_string(d)); }

Dataset load_dataset(const std::string& path) { return dataset_from_string(read_text_file(path)); }

}  // namespace nlmi
