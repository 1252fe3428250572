#pragma once

#include <cstddef>
#include <functional>

#include "nlmi/tensor.hpp"

namespace nlmi {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Compares the taped gradient of `f` at `x` with central differences.
///
/// `x` is perturbed in place, one coordinate at a time, and restored. The
/// error per coordinate is |analytic - numeric| / max(1, |analytic|). `f` may
/// ignore its argument and read `x` through a captured handle (this is how
/// model parameters are checked).
GradCheckReport finite_diff_report(const ScalarFn& f, Tensor x, double h = 1e-5);

/// Maximum relative error of finite_diff_report.
double finite_diff_check(const ScalarFn& f, Tensor x, double h = 1e-5);

}  // namespace nlmi
