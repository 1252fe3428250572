#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlmi/json_io.hpp"
#include "nlmi/layers.hpp"

// Command implementations behind the `nlmi` executable. Each returns the
// process exit code: 0 success, 1 config/validation error, 2 numerical failure.

namespace nlmi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

/// Command-line overrides applied to a run config file before it is parsed.
/// Changing `base` or `nlmi` without `terms` resets the terms to the
/// variant's defaults.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> layers;
  std::optional<std::string> base;
  std::optional<bool> nlmi;
  std::optional<std::string> terms;
};

/// Applies `o` to the JSON of a run config.
void apply_overrides(Json& run_config, const Overrides& o);

struct GenOptions {
  std::string config;  // run config, or a bare dataset spec object
  Overrides overrides;
};

struct TrainOptions {
  std::string config;
  Overrides overrides;
  bool verbose = false;  // one line per epoch on `err`
};

struct EvalOptions {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  std::size_t batch_size = 16;
};

struct GradcheckOptions {
  std::string variant = "nlmi-gatedgcn";
  std::size_t dim = 8;
  std::size_t nodes = 6;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
};

/// The four term subsets compared by `ablate`, in output order.
std::vector<UpdateTerms> ablation_rows();

/// Writes <out>/dataset.json.
int cmd_gen(const GenOptions& opt, std::ostream& out, std::ostream& err);

/// Writes <out>/config.json (resolved seeds), <out>/seed-<s>/{metrics.csv,
/// checkpoint.json} per seed and <out>/summary.json; prints the summary.
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);

/// Prints {"split", "metric", "value", "loss"} for the checkpoint on one split.
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);

/// Prints the max relative error per tensor; fails above `tolerance`.
int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err);

/// Trains the config once per ablation row (NLMI forced on) and prints a
/// table with one row per term subset; writes <out>/ablation.json and
/// <out>/ablation.csv.
int cmd_ablate(const TrainOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace nlmi::cli
