#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nlmi/dataset.hpp"
#include "nlmi/json_io.hpp"
#include "nlmi/model.hpp"
#include "nlmi/train_loop.hpp"

namespace nlmi {

inline constexpr int kRunConfigVersion = 1;

/// One reproducible experiment.
///
/// Seed derivation from the root `seed`:
///   dataset seed  = dataset.seed if given, else derive_seed(seed, "dataset")
///   train seeds   = `seeds` if given, else derive_seed(seed, i) for i = 0..3
/// and for every train seed s: init = derive_seed(s, "init"), batch order =
/// derive_seed(s, "batch"). to_json() writes the resolved values.
struct RunConfig {
  std::optional<DatasetSpec> dataset;  // generated on the fly...
  std::string dataset_path;            // ...or loaded from a dataset file
  ModelConfig model;                   // widths are refit to the dataset
  TrainConfig train;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::string out = "runs";
};

/// Rejects unknown keys and a missing or unsupported "version".
RunConfig run_config_from_json(const Json& j);
Json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);

Dataset materialize_dataset(const RunConfig& c);

}  // namespace nlmi
