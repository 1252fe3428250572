#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "nlmi/generators.hpp"
#include "nlmi/graph.hpp"
#include "nlmi/json_io.hpp"

namespace nlmi {

enum class TaskKind { NodeClass, GraphClass, EdgePred, GraphReg };

std::string to_string(TaskKind t);
TaskKind task_from_string(const std::string& s);

using GeneratorParams = std::variant<data::SbmParams, data::PatternParams, data::PatternPresenceParams,
                                     data::TspParams, data::RegressionParams>;

/// Everything needed to regenerate a dataset bit-for-bit.
struct DatasetSpec {
  GeneratorParams generator = data::SbmParams{};
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  std::uint64_t seed = 0;

  TaskKind task() const;
  /// "sbm", "planted", "pattern-presence", "tsp" or "regression".
  std::string generator_name() const;

  bool operator==(const DatasetSpec&) const = default;
};

enum class Split { Train, Val, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
  DatasetSpec spec;
  std::vector<Graph> train;
  std::vector<Graph> val;
  std::vector<Graph> test;

  const std::vector<Graph>& split(Split s) const;
  bool operator==(const Dataset&) const = default;
};

/// Each split draws from its own sub-seed derive_seed(spec.seed, "train"|"val"|"test").
Dataset generate_dataset(const DatasetSpec& spec);

/// Graph generator for one draw of the spec's generator.
Graph generate_graph(const GeneratorParams& params, Rng& rng);

inline constexpr int kDatasetFormatVersion = 1;

Json spec_to_json(const DatasetSpec& spec);
DatasetSpec spec_from_json(const Json& j);

Json graph_to_json(const Graph& g, TaskKind task);
Graph graph_from_json(const Json& j, TaskKind task);

std::string dataset_to_string(const Dataset& d);
Dataset dataset_from_string(const std::string& text);

/// Files are JSON: {"version", "spec", "splits": {"train", "val", "test"}}.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace nlmi
