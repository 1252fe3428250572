#include "nlmi/train_loop.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "nlmi/errors.hpp"
#include "nlmi/losses.hpp"
#include "nlmi/metrics.hpp"
#include "nlmi/optim.hpp"

namespace nlmi {

Json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"patience", c.patience},
          {"factor", c.factor},
          {"min_lr", c.min_lr},
          {"max_epochs", c.max_epochs},
          {"batch_size", c.batch_size},
          {"class_weights", c.class_weights},
          {"pos_weight", c.pos_weight}};
}

TrainConfig train_config_from_json(const Json& j) {
  reject_unknown_keys(
      j, {"lr", "patience", "factor", "min_lr", "max_epochs", "batch_size", "class_weights", "pos_weight"},
      "train config");
  TrainConfig c;
  if (j.contains("lr")) c.lr = j.at("lr").get<double>();
  if (j.contains("patience")) c.patience = j.at("patience").get<std::size_t>();
  if (j.contains("factor")) c.factor = j.at("factor").get<double>();
  if (j.contains("min_lr")) c.min_lr = j.at("min_lr").get<double>();
  if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<std::size_t>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("class_weights")) c.class_weights = j.at("class_weights").get<bool>();
  if (j.contains("pos_weight")) c.pos_weight = j.at("pos_weight").get<double>();
  if (c.batch_size == 0) throw ConfigError("train config: batch_size must be positive");
  if (c.max_epochs == 0) throw ConfigError("train config: max_epochs must be positive");
  if (c.lr < 0.0) throw ConfigError("train config: lr must be non-negative");
  if (c.pos_weight < 0.0) throw ConfigError("train config: pos_weight must be non-negative");
  return c;
}

std::string metric_name(TaskKind task) {
  switch (task) {
    case TaskKind::NodeClass:
      return "weighted_accuracy";
    case TaskKind::GraphClass:
      return "accuracy";
    case TaskKind::EdgePred:
      return "f1_positive";
    case TaskKind::GraphReg:
      return "mae";
  }
  return "?";
}

bool higher_is_better(TaskKind task) { return task != TaskKind::GraphReg; }

std::string metrics_csv(std::span<const MetricsRecord> history) {
  std::ostringstream os;
  os << "epoch,split,loss,metric,value,seconds\n";
  os << std::setprecision(17);
  for (const auto& r : history) {
    os << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.metric << ',' << r.value << ','
       << std::setprecision(6) << r.seconds << std::setprecision(17) << '\n';
  }
  return os.str();
}

LossSettings loss_settings(const Dataset& d, const ModelConfig& model, const TrainConfig& cfg) {
  LossSettings s;
  s.task = d.spec.task();
  s.num_classes = model.out_dim;
  s.class_weights = cfg.class_weights;
  s.pos_weight = cfg.pos_weight;
  if (s.task == TaskKind::EdgePred && cfg.pos_weight == 0.0) {
    double pos = 0, neg = 0;
    for (const auto& g : d.train)
      for (int y : g.edge_labels) (y ? pos : neg) += 1.0;
    s.pos_weight = pos > 0.0 ? neg / pos : 1.0;
  }
  return s;
}

namespace {

// Loss of one batch plus the predictions and targets the metric needs.
struct BatchOutcome {
  Tensor loss;
  std::size_t targets = 0;
};

struct Collected {
  std::vector<int> predicted_labels;
  std::vector<int> labels;
  std::vector<double> predicted_values;
  std::vector<double> targets;
};

BatchOutcome batch_loss(const Tensor& pred, const GraphBatch& b, const LossSettings& s, Collected& sink) {
  BatchOutcome out;
  switch (s.task) {
    case TaskKind::NodeClass:
    case TaskKind::GraphClass: {
      const std::vector<int> y = s.task == TaskKind::NodeClass ? b.node_labels() : b.graph_labels();
      std::vector<double> w;
      if (s.class_weights) w = inverse_frequency_weights(y, s.num_classes);
      out.loss = cross_entropy(pred, y, w);
      out.targets = y.size();
      auto p = argmax_rows(pred);
      sink.predicted_labels.insert(sink.predicted_labels.end(), p.begin(), p.end());
      sink.labels.insert(sink.labels.end(), y.begin(), y.end());
      break;
    }
    case TaskKind::EdgePred: {
      const std::vector<int> y = b.edge_labels();
      out.loss = binary_cross_entropy(pred, y, s.pos_weight);
      out.targets = y.size();
      for (double v : pred.data()) sink.predicted_labels.push_back(v > 0.0 ? 1 : 0);
      sink.labels.insert(sink.labels.end(), y.begin(), y.end());
      break;
    }
    case TaskKind::GraphReg: {
      const std::vector<double> t = b.graph_targets();
      out.loss = l1_loss(pred, t);
      out.targets = t.size();
      sink.predicted_values.insert(sink.predicted_values.end(), pred.data().begin(), pred.data().end());
      sink.targets.insert(sink.targets.end(), t.begin(), t.end());
      break;
    }
  }
  return out;
}

double metric_of(const Collected& c, TaskKind task) {
  switch (task) {
    case TaskKind::NodeClass:
      return weighted_accuracy(c.predicted_labels, c.labels);
    case TaskKind::GraphClass:
      return accuracy(c.predicted_labels, c.labels);
    case TaskKind::EdgePred:
      return f1_positive(c.predicted_labels, c.labels);
    case TaskKind::GraphReg:
      return mae(c.predicted_values, c.targets);
  }
  return 0.0;
}

}  // namespace

EvalResult evaluate(Model& model, std::span<const Graph> graphs, const LossSettings& settings,
                    std::size_t batch_size) {
  if (graphs.empty()) throw ConfigError("evaluate: empty split");
  NoGradScope no_grad;
  Collected sink;
  double weighted_loss = 0.0;
  std::size_t total = 0;
  for (std::size_t start = 0; start < graphs.size(); start += batch_size) {
    const std::size_t end = std::min(graphs.size(), start + batch_size);
    GraphBatch b = batch(graphs.subspan(start, end - start));
    ForwardResult r = model.forward(b, Mode::Eval);
    BatchOutcome o = batch_loss(r.predictions, b, settings, sink);
    weighted_loss += o.loss.item() * static_cast<double>(o.targets);
    total += o.targets;
  }
  return {weighted_loss / static_cast<double>(total), metric_of(sink, settings.task)};
}

TrainResult train_loop(const Dataset& data, Model& model, const TrainConfig& cfg, std::uint64_t seed,
                       const EpochCallback& on_epoch) {
  if (data.train.empty() || data.val.empty() || data.test.empty()) {
    throw ConfigError("train_loop: train, val and test splits must be non-empty");
  }
  const LossSettings settings = loss_settings(data, model.config(), cfg);
  const std::string metric = metric_name(settings.task);
  Rng batch_rng(derive_seed(seed, "batch"));
  Adam adam(model.parameters(), AdamConfig{cfg.lr});
  PlateauScheduler scheduler(cfg.lr, cfg.patience, cfg.factor, cfg.min_lr);
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  TrainResult result;
  std::vector<NamedTensor> best_state;
  double best_val_loss = std::numeric_limits<double>::infinity();
  adam.zero_grad();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = batch_rng.permutation(data.train.size());
    Collected sink;
    double weighted_loss = 0.0;
    std::size_t total = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      std::vector<const Graph*> members;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        members.push_back(&data.train[order[k]]);
      }
      GraphBatch b = batch(std::span<const Graph* const>(members));
      Tape tape;
      TapeScope scope(tape);
      ForwardResult r;
      try {
        r = model.forward(b, Mode::Train);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) + ": " +
                             e.what());
      }
      BatchOutcome o = batch_loss(r.predictions, b, settings, sink);
      if (!std::isfinite(o.loss.item())) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      }
      tape.backward(o.loss);
      adam.step();
      adam.zero_grad();
      weighted_loss += o.loss.item() * static_cast<double>(o.targets);
      total += o.targets;
    }

    const EvalResult val = evaluate(model, data.val, settings, cfg.batch_size);
    const EvalResult test = evaluate(model, data.test, settings, cfg.batch_size);
    const double now = elapsed();
    MetricsRecord train_rec{epoch, "train", weighted_loss / static_cast<double>(total), metric,
                            metric_of(sink, settings.task), now};
    MetricsRecord val_rec{epoch, "val", val.loss, metric, val.metric, now};
    MetricsRecord test_rec{epoch, "test", test.loss, metric, test.metric, now};
    result.history.push_back(train_rec);
    result.history.push_back(val_rec);
    result.history.push_back(test_rec);
    result.epochs_run = epoch;

    if (val.loss < best_val_loss) {
      best_val_loss = val.loss;
      result.best_epoch = epoch;
      result.best_val = val;
      result.test_at_best = test;
      best_state.clear();
      for (const auto& nt : model.state()) best_state.push_back({nt.name, nt.tensor.clone()});
    }

    const auto decision = scheduler.step(val.loss);
    adam.set_lr(decision.lr);
    result.final_lr = decision.lr;
    if (on_epoch) on_epoch(train_rec, val_rec, test_rec, decision.lr);
    if (decision.stop) {
      result.stop_reason = "lr-threshold";
      break;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "max-epochs";
  if (!best_state.empty()) model.load_state(best_state);
  return result;
}

Json SeedSummary::to_json() const {
  Json seeds = Json::array();
  for (const auto& r : runs) {
    seeds.push_back({{"seed", r.seed},
                     {"test", r.result.test_at_best.metric},
                     {"val", r.result.best_val.metric},
                     {"epochs", r.result.epochs_run},
                     {"best_epoch", r.result.best_epoch}});
  }
  return {{"metric", metric}, {"seeds", std::move(seeds)}, {"mean", mean}, {"std", std}};
}

SeedSummary run_seeds(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                      std::span<const std::uint64_t> seeds,
                      const std::function<void(std::uint64_t, const Model&, const TrainResult&)>& on_model,
                      const EpochCallback& on_epoch) {
  SeedSummary summary;
  summary.metric = metric_name(data.spec.task());
  for (std::uint64_t seed : seeds) {
    Rng init(derive_seed(seed, "init"));
    Model model(model_cfg, init);
    SeedRun run{seed, train_loop(data, model, cfg, seed, on_epoch)};
    if (on_model) on_model(seed, model, run.result);
    summary.runs.push_back(std::move(run));
  }
  if (!summary.runs.empty()) {
    double sum = 0.0;
    for (const auto& r : summary.runs) sum += r.result.test_at_best.metric;
    summary.mean = sum / static_cast<double>(summary.runs.size());
    double sq = 0.0;
    for (const auto& r : summary.runs) sq += std::pow(r.result.test_at_best.metric - summary.mean, 2);
    summary.std = std::sqrt(sq / static_cast<double>(summary.runs.size()));
  }
  return summary;
}

}  // namespace nlmi
