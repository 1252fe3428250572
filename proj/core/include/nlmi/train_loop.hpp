#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nlmi/dataset.hpp"
#include "nlmi/json_io.hpp"
#include "nlmi/model.hpp"

namespace nlmi {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t patience = 10;
  double factor = 0.5;
  double min_lr = 1e-6;
  std::size_t max_epochs = 1000;
  std::size_t batch_size = 16;
  bool class_weights = true;  // inverse class frequency per batch (classification tasks)
  double pos_weight = 0.0;    // edge-pred positive weight; 0 = negatives / positives of the train split

  bool operator==(const TrainConfig&) const = default;
};

Json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

/// "weighted_accuracy" (node-class), "accuracy" (graph-class), "f1_positive" (edge-pred), "mae" (graph-reg).
std::string metric_name(TaskKind task);
bool higher_is_better(TaskKind task);

struct MetricsRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  std::string metric;
  double value = 0.0;
  double seconds = 0.0;  // wall time since the start of training; excluded from determinism checks
};

/// Header "epoch,split,loss,metric,value,seconds" followed by one line per record.
std::string metrics_csv(std::span<const MetricsRecord> history);

struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;
};

/// Loss settings shared by training and evaluation.
struct LossSettings {
  TaskKind task = TaskKind::NodeClass;
  std::size_t num_classes = 2;
  bool class_weights = true;
  double pos_weight = 1.0;
};

LossSettings loss_settings(const Dataset& d, const ModelConfig& model, const TrainConfig& cfg);

/// Eval-mode pass over `graphs` in storage order, `batch_size` graphs at a time.
/// The loss is the per-target weighted mean of the batch losses; the metric is
/// computed over all predictions at once.
EvalResult evaluate(Model& model, std::span<const Graph> graphs, const LossSettings& settings,
                    std::size_t batch_size);

struct TrainResult {
  std::vector<MetricsRecord> history;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  EvalResult best_val;
  EvalResult test_at_best;  // test split evaluated at the best-validation epoch
  double final_lr = 0.0;
  std::string stop_reason;  // "lr-threshold" or "max-epochs"
};

using EpochCallback = std::function<void(const MetricsRecord& train, const MetricsRecord& val,
                                         const MetricsRecord& test, double lr)>;

/// Adam + plateau schedule on the train split; validation loss drives the
/// schedule and best-model selection. Batch order is drawn from
/// derive_seed(seed, "batch"). On return `model` holds the best-validation
/// parameters. NumericalError is raised on a non-finite loss, naming the
/// epoch and batch.
TrainResult train_loop(const Dataset& data, Model& model, const TrainConfig& cfg, std::uint64_t seed,
                       const EpochCallback& on_epoch = {});

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult result;
};

struct SeedSummary {
  std::string metric;
  std::vector<SeedRun> runs;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over seeds

  /// {"metric", "seeds": [{"seed", "test", "val", "epochs", "best_epoch"}...], "mean", "std"}
  Json to_json() const;
};

/// Initializes a fresh model from derive_seed(seed, "init") for every seed and trains it.
/// `on_model` (optional) sees each trained model, e.g. to write checkpoints.
SeedSummary run_seeds(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                      std::span<const std::uint64_t> seeds,
                      const std::function<void(std::uint64_t, const Model&, const TrainResult&)>& on_model = {},
                      const EpochCallback& on_epoch = {});

}  // namespace nlmi
