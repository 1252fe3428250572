#include "nlmi/optim.hpp"

#include <cmath>

#include "nlmi/errors.hpp"

namespace nlmi {

void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& moments, std::size_t step,
                 const AdamConfig& cfg) {
  if (grad.size() != param.size()) throw ShapeError("adam: gradient size mismatch");
  if (step == 0) throw std::logic_error("adam: step is 1-based");
  if (moments.m.size() != param.size()) {
    moments.m.assign(param.size(), 0.0);
    moments.v.assign(param.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * grad[i];
    moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = moments.m[i] / c1;
    const double v_hat = moments.v[i] / c2;
    param[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

Adam::Adam(std::vector<NamedTensor> params, AdamConfig cfg)
    : params_(std::move(params)), moments_(params_.size()), cfg_(cfg) {}

void Adam::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    adam_update(p.data(), p.grad(), moments_[i], step_, cfg_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

PlateauScheduler::PlateauScheduler(double lr, std::size_t patience, double factor, double min_lr)
    : lr_(lr), patience_(patience), factor_(factor), min_lr_(min_lr) {
  if (!(lr >= 0.0)) throw ConfigError("scheduler: lr must be non-negative");
  if (patience == 0) throw ConfigError("scheduler: patience must be positive");
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("scheduler: factor must lie in (0, 1)");
}

PlateauScheduler::Decision PlateauScheduler::step(double val_loss) {
  bool reduced = false;
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
    reduced = true;
  }
  return {lr_, reduced, reduced && lr_ < min_lr_};
}

}  // namespace nlmi
