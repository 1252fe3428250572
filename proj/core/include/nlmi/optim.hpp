#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "nlmi/layers.hpp"

namespace nlmi {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers of one parameter.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update of `param` in place; `step` is 1-based.
void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& moments, std::size_t step,
                 const AdamConfig& cfg);

/// Adam over a fixed list of parameter tensors, reading their .grad().
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamConfig cfg);

  void step();
  void zero_grad();

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::size_t step_count() const { return step_; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<AdamMoments> moments_;
  AdamConfig cfg_;
  std::size_t step_ = 0;
};

/// Halves the learning rate after `patience` consecutive epochs without a
/// strict decrease of the validation loss and asks to stop once a reduction
/// takes the rate below `min_lr` (a run started below `min_lr`, e.g. lr = 0,
/// relies on the epoch cap instead).
///
/// The first epoch always counts as an improvement. Epochs that trigger a
/// reduction reset the counter, so the next reduction needs another
/// `patience` flat epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, std::size_t patience, double factor = 0.5, double min_lr = 1e-6);

  struct Decision {
    double lr;
    bool reduced;
    bool stop;
  };

  Decision step(double val_loss);

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t epochs_since_improvement() const { return bad_epochs_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
};

}  // namespace nlmi
