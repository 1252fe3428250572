#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "nlmi/errors.hpp"
#include "nlmi/gradcheck.hpp"
#include "nlmi/losses.hpp"
#include "nlmi/metrics.hpp"
#include "nlmi/ops.hpp"
#include "nlmi/optim.hpp"
#include "nlmi/train_loop.hpp"
#include "nlmi/verification.hpp"
#include "test_support.hpp"

namespace nlmi {
namespace {

using testing::random_tensor;
using testing::values;

// ---------------------------------------------------------------- Adam

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.0, 0.0};
  AdamMoments m;
  for (std::size_t step = 1; step <= 5; ++step) adam_update(p, g, m, step, {});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMatchesClosedForm) {
  // From fresh moments, m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
  const AdamConfig cfg{0.01};
  const std::vector<double> g{0.5, -3.0, 1e-3};
  std::vector<double> p{0.0, 0.0, 0.0};
  AdamMoments m;
  adam_update(p, g, m, 1, cfg);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(p[i], -cfg.lr * g[i] / (std::abs(g[i]) + cfg.eps), 1e-15);
}

TEST(Adam, ConvergesOnQuadraticBowl) {
  Tensor x = Tensor::from({1}, {1.0}, true);
  Adam adam({{"x", x}}, AdamConfig{0.05});
  for (int i = 0; i < 200; ++i) {
    adam.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    tape.backward(ops::sum(ops::square(x)));
    adam.step();
  }
  EXPECT_LT(std::abs(x[0]), 1e-2);
  EXPECT_EQ(adam.step_count(), 200u);
}

// ---------------------------------------------------------------- scheduler

TEST(Scheduler, ImprovingLossesKeepRate) {
  PlateauScheduler s(1e-3, 2);
  for (double loss : {5.0, 4.0, 3.0, 2.0, 1.0}) {
    const auto d = s.step(loss);
    EXPECT_EQ(d.lr, 1e-3);
    EXPECT_FALSE(d.reduced);
    EXPECT_FALSE(d.stop);
  }
}

TEST(Scheduler, PatienceTwoThreeFlatEpochsHalveOnce) {
  PlateauScheduler s(1e-3, 2);
  EXPECT_FALSE(s.step(1.0).reduced);
  EXPECT_FALSE(s.step(1.0).reduced);
  const auto d = s.step(1.0);
  EXPECT_TRUE(d.reduced);
  EXPECT_EQ(d.lr, 5e-4);
}

TEST(Scheduler, HalvingBelowThresholdSignalsStop) {
  PlateauScheduler s(1.9e-6, 1);
  s.step(1.0);
  const auto d = s.step(1.0);
  EXPECT_TRUE(d.reduced);
  EXPECT_DOUBLE_EQ(d.lr, 0.95e-6);
  EXPECT_TRUE(d.stop);
}

TEST(Scheduler, RateNeverIncreases) {
  PlateauScheduler s(1e-2, 1);
  Rng rng(1);
  double last = s.lr();
  for (int i = 0; i < 200; ++i) {
    const auto d = s.step(rng.uniform());
    EXPECT_LE(d.lr, last);
    last = d.lr;
    if (d.stop) break;
  }
}

// ---------------------------------------------------------------- losses

TEST(Losses, UniformLogitsGiveLogC) {
  const std::vector<int> y{0, 3, 2, 1};
  EXPECT_NEAR(cross_entropy(Tensor::zeros({4, 5}), y).item(), std::log(5.0), 1e-15);
}

TEST(Losses, ConfidentCorrectLogitsGiveNearZero) {
  const std::vector<int> y{1, 0};
  EXPECT_LT(cross_entropy(Tensor::matrix({{-30, 30}, {30, -30}}), y).item(), 1e-20);
}

TEST(Losses, WeightedCrossEntropyIsWeightedMean) {
  const std::vector<int> y{0, 1};
  const std::vector<double> w{1.0, 3.0};
  Tensor logits = Tensor::matrix({{0, std::log(3.0)}, {0, 0}});
  const double nll0 = std::log(4.0), nll1 = std::log(2.0);
  EXPECT_NEAR(cross_entropy(logits, y, w).item(), (nll0 + 3 * nll1) / 4, 1e-15);
}

TEST(Losses, InverseFrequencyWeights) {
  const std::vector<int> y{0, 0, 0, 1};
  EXPECT_EQ(inverse_frequency_weights(y, 3), (std::vector<double>{4.0 / 9.0, 4.0 / 3.0, 0.0}));
}

TEST(Losses, BinaryCrossEntropyHandFormula) {
  const std::vector<int> y{1, 0};
  Tensor x = Tensor::from({2, 1}, {0.3, -1.2});
  const auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  const double expected = -(2.0 * std::log(sig(0.3)) + std::log(1 - sig(-1.2))) / 2;
  EXPECT_NEAR(binary_cross_entropy(x, y, 2.0).item(), expected, 1e-15);
}

TEST(Losses, L1IsMeanAbsoluteError) {
  const std::vector<double> t{1.0, -1.0, 0.5};
  EXPECT_DOUBLE_EQ(l1_loss(Tensor::from({3, 1}, {2.0, -1.0, 0.0}), t).item(), 0.5);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  Tensor logits = random_tensor({6, 3}, rng);
  const std::vector<int> y{0, 2, 1, 1, 0, 2};
  const std::vector<double> w{0.5, 2.0, 1.0};
  EXPECT_LT(finite_diff_check([&](const Tensor& t) { return cross_entropy(t, y, w); }, logits), 1e-5);

  Tensor scores = random_tensor({5, 1}, rng);
  const std::vector<int> b{1, 0, 0, 1, 0};
  EXPECT_LT(finite_diff_check([&](const Tensor& t) { return binary_cross_entropy(t, b, 1.5); }, scores), 1e-5);

  Tensor pred = random_tensor({4, 1}, rng);
  const std::vector<double> target{0.1, -2.0, 3.0, 0.7};
  EXPECT_LT(finite_diff_check([&](const Tensor& t) { return l1_loss(t, target); }, pred), 1e-5);
}

TEST(Losses, ShapeErrors) {
  const std::vector<int> y{0, 1, 1};
  EXPECT_THROW(cross_entropy(Tensor::zeros({2, 2}), y), ShapeError);
  const std::vector<int> bad{0, 5};
  EXPECT_THROW(cross_entropy(Tensor::zeros({2, 2}), bad), ShapeError);
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, AllCorrect) {
  const std::vector<int> y{0, 1, 1, 0};
  EXPECT_EQ(accuracy(y, y), 1.0);
  EXPECT_EQ(weighted_accuracy(y, y), 1.0);
  EXPECT_EQ(f1_positive(y, y), 1.0);
}

TEST(Metrics, AllNegativePredictionHasZeroF1) {
  std::vector<int> y(100, 0);
  for (int i = 0; i < 10; ++i) y[i] = 1;
  const std::vector<int> pred(100, 0);
  EXPECT_EQ(f1_positive(pred, y), 0.0);
  EXPECT_EQ(accuracy(pred, y), 0.9);
}

TEST(Metrics, WeightedAccuracyIsMeanRecall) {
  std::vector<int> y(100, 0), pred(100, 0);
  for (int i = 90; i < 100; ++i) y[i] = 1;
  for (int i = 90; i < 95; ++i) pred[i] = 1;
  EXPECT_DOUBLE_EQ(weighted_accuracy(pred, y), 0.75);
}

TEST(Metrics, F1AndMae) {
  const std::vector<int> y{1, 1, 0, 0}, pred{1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(f1_positive(pred, y), 0.5);
  const std::vector<double> a{1, 2, 3}, b{2, 2, 1};
  EXPECT_DOUBLE_EQ(mae(a, b), 1.0);
  EXPECT_EQ(argmax_rows(Tensor::matrix({{1, 3, 3}, {5, 0, 1}})), (std::vector<int>{1, 0}));
}

// ---------------------------------------------------------------- train loop

Dataset sbm_dataset(std::size_t train, std::size_t val, std::size_t test, std::uint64_t seed) {
  data::SbmParams p;
  p.n_nodes = 16;
  DatasetSpec s;
  s.generator = p;
  s.train = train;
  s.val = val;
  s.test = test;
  s.seed = seed;
  return generate_dataset(s);
}

ModelConfig fitted(verify::Variant v, const Dataset& d, std::size_t layers = 2, std::size_t width = 8) {
  return fit_to_dataset(verify::config_for(v, width, layers), d);
}

std::vector<std::tuple<std::size_t, std::string, double, double>> comparable(const TrainResult& r) {
  std::vector<std::tuple<std::size_t, std::string, double, double>> out;
  for (const auto& m : r.history) out.emplace_back(m.epoch, m.split, m.loss, m.value);
  return out;
}

TEST(TrainLoop, ZeroLearningRateFreezesParametersAndMetrics) {
  const Dataset d = sbm_dataset(4, 2, 2, 1);
  Rng rng(2);
  Model m(fitted(verify::Variant::NlmiGcn, d), rng);
  std::vector<std::vector<double>> before;
  for (const auto& p : m.parameters()) before.push_back(values(p.tensor));
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.max_epochs = 5;
  const TrainResult r = train_loop(d, m, cfg, 3);
  std::vector<std::vector<double>> after;
  for (const auto& p : m.parameters()) after.push_back(values(p.tensor));
  EXPECT_EQ(before, after);
  EXPECT_EQ(r.epochs_run, 5u);
  EXPECT_EQ(r.stop_reason, "max-epochs");
  for (const auto& rec : r.history) {
    if (rec.split == "train") continue;
    EXPECT_EQ(rec.loss, r.history[rec.split == "val" ? 1 : 2].loss);
    EXPECT_EQ(rec.value, r.history[rec.split == "val" ? 1 : 2].value);
  }
}

TEST(TrainLoop, SameSeedSameHistory) {
  const Dataset d = sbm_dataset(6, 2, 2, 4);
  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.batch_size = 4;
  const auto run = [&] {
    Rng rng(derive_seed(5, "init"));
    Model m(fitted(verify::Variant::NlmiGatedGcn, d), rng);
    return comparable(train_loop(d, m, cfg, 5));
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainLoop, ReloadedDatasetTrainsIdentically) {
  const Dataset d = sbm_dataset(4, 2, 2, 6);
  const Dataset reloaded = dataset_from_string(dataset_to_string(d));
  TrainConfig cfg;
  cfg.max_epochs = 4;
  const auto run = [&](const Dataset& data) {
    Rng rng(7);
    Model m(fitted(verify::Variant::GatedGcn, data), rng);
    return comparable(train_loop(data, m, cfg, 8));
  };
  EXPECT_EQ(run(d), run(reloaded));
}

TEST(TrainLoop, RestoresBestValidationState) {
  const Dataset d = sbm_dataset(4, 3, 3, 9);
  TrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.lr = 0.05;
  Rng rng(10);
  Model m(fitted(verify::Variant::Gcn, d), rng);
  const TrainResult r = train_loop(d, m, cfg, 11);
  const EvalResult val = evaluate(m, d.val, loss_settings(d, m.config(), cfg), cfg.batch_size);
  EXPECT_EQ(val.loss, r.best_val.loss);
  for (const auto& rec : r.history)
    if (rec.split == "val") {
      EXPECT_GE(rec.loss, r.best_val.loss);
    }
}

TEST(TrainLoop, NonFiniteForwardReportsEpochAndBatch) {
  Dataset d = sbm_dataset(2, 1, 1, 12);
  d.train[1].node_features(0, 0) = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.max_epochs = 3;
  Rng rng(13);
  Model m(fitted(verify::Variant::Gcn, d), rng);
  try {
    train_loop(d, m, cfg, 14);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1, batch"), std::string::npos) << msg;
  }
}

TEST(TrainLoop, MemorizesTwoGraphs) {
  Dataset d = sbm_dataset(2, 0, 0, 15);
  d.val = d.train;
  d.test = d.train;
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.max_epochs = 500;
  cfg.patience = 1000;
  Rng rng(16);
  Model m(fitted(verify::Variant::NlmiGatedGcn, d, 2, 16), rng);
  const TrainResult r = train_loop(d, m, cfg, 17);
  double best = 1e9;
  for (const auto& rec : r.history)
    if (rec.split == "train") best = std::min(best, rec.loss);
  EXPECT_LT(best, 0.01);
}

TEST(TrainLoop, EmptySplitIsAConfigError) {
  Dataset d = sbm_dataset(2, 1, 0, 18);
  Rng rng(19);
  Model m(fitted(verify::Variant::Gcn, d), rng);
  EXPECT_THROW(train_loop(d, m, TrainConfig{}, 1), ConfigError);
}

TEST(TrainLoop, MetricsCsvHeader) {
  const std::vector<MetricsRecord> rows{{1, "train", 0.5, "mae", 0.25, 0.1}};
  const std::string csv = metrics_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,split,loss,metric,value,seconds");
  EXPECT_NE(csv.find("1,train,0.5,mae,0.25,"), std::string::npos);
}

TEST(RunSeeds, SummaryHasOneEntryPerSeedAndPopulationStd) {
  const Dataset d = sbm_dataset(3, 2, 2, 20);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  const SeedSummary s = run_seeds(d, fitted(verify::Variant::Gcn, d), cfg, seeds);
  ASSERT_EQ(s.runs.size(), 4u);
  double mean = 0, var = 0;
  for (const auto& r : s.runs) mean += r.result.test_at_best.metric / 4;
  for (const auto& r : s.runs) var += std::pow(r.result.test_at_best.metric - mean, 2) / 4;
  EXPECT_NEAR(s.mean, mean, 1e-15);
  EXPECT_NEAR(s.std, std::sqrt(var), 1e-15);
  const Json j = s.to_json();
  EXPECT_EQ(j.at("seeds").size(), 4u);
  EXPECT_EQ(j.at("metric"), "weighted_accuracy");
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.lr = 0.01;
  c.patience = 3;
  EXPECT_EQ(train_config_from_json(train_config_to_json(c)), c);
  EXPECT_THROW(train_config_from_json(Json{{"learning_rate", 0.1}}), ConfigError);
  EXPECT_THROW(train_config_from_json(Json{{"batch_size", 0}}), ConfigError);
}

}  // namespace
}  // namespace nlmi
