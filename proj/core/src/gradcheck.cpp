#include "nlmi/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nlmi/errors.hpp"

namespace nlmi {

namespace {

double evaluate(const ScalarFn& f, const Tensor& x) {
  NoGradScope no_grad;
  Tensor y = f(x);
  if (!y.defined() || y.numel() != 1) throw ShapeError("finite_diff_check: f must return a scalar");
  const double v = y.item();
  if (std::isnan(v)) throw NumericalError("finite_diff_check: f returned NaN");
  return v;
}

}  // namespace

GradCheckReport finite_diff_report(const ScalarFn& f, Tensor x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_check: step must be positive");

  const bool had_requires_grad = x.requires_grad();
  const std::vector<double> saved_grad = x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                                                      : std::vector<double>{};
  x.set_requires_grad(true);
  x.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor y = f(x);
    if (!y.defined() || y.numel() != 1) throw ShapeError("finite_diff_check: f must return a scalar");
    if (std::isnan(y.item())) throw NumericalError("finite_diff_check: f returned NaN");
    tape.backward(y);
    analytic.assign(x.grad().begin(), x.grad().end());
  }

  GradCheckReport report;
  auto values = x.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double original = values[i];
    values[i] = original + h;
    const double up = evaluate(f, x);
    values[i] = original - h;
    const double down = evaluate(f, x);
    values[i] = original;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    if (i == 0 || err > report.max_rel_error) report = {err, i, analytic[i], numeric};
  }

  x.set_requires_grad(had_requires_grad);
  if (saved_grad.empty()) {
    x.impl()->grad.clear();
  } else {
    std::copy(saved_grad.begin(), saved_grad.end(), x.mutable_grad().begin());
  }
  return report;
}

double finite_diff_check(const ScalarFn& f, Tensor x, double h) { return finite_diff_report(f, x, h).max_rel_error; }

}  // namespace nlmi
