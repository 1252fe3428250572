#include "nlmi/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nlmi/errors.hpp"

namespace nlmi {

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

bool recording(const Tensor& t) { return Tape::active() && t.requires_grad(); }

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const double> class_weights) {
  if (logits.rank() != 2 || logits.rows() != labels.size()) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " for " + std::to_string(labels.size()) +
                     " labels");
  }
  const std::size_t n = logits.rows(), c = logits.cols();
  if (!class_weights.empty() && class_weights.size() != c) throw ShapeError("cross_entropy: one weight per class");
  auto x = logits.data();
  std::vector<double> probs(n * c);
  std::vector<double> w(n);
  double total = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) throw ShapeError("cross_entropy: label out of range");
    const double* row = x.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(row[k] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t k = 0; k < c; ++k) probs[i * c + k] = std::exp(row[k] - log_z);
    w[i] = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(labels[i])];
    total += w[i] * (log_z - row[labels[i]]);
    wsum += w[i];
  }
  if (!(wsum > 0.0)) throw NumericalError("cross_entropy: total label weight is zero");
  Tensor out = Tensor::scalar(total / wsum);
  if (recording(logits)) {
    std::vector<int> y(labels.begin(), labels.end());
    Tape::active()->record("cross_entropy", {logits}, out,
                           [logits, out, probs = std::move(probs), w = std::move(w), y = std::move(y), wsum, n, c]() {
                             const double go = out.impl()->grad[0];
                             Tensor l = logits;
                             auto g = l.mutable_grad();
                             for (std::size_t i = 0; i < n; ++i) {
                               const double s = go * w[i] / wsum;
                               for (std::size_t k = 0; k < c; ++k) {
                                 const double target = static_cast<std::size_t>(y[i]) == k ? 1.0 : 0.0;
                                 g[i * c + k] += s * (probs[i * c + k] - target);
                               }
                             }
                           });
  }
  return out;
}

Tensor binary_cross_entropy(const Tensor& logits, std::span<const int> labels, double pos_weight) {
  if (logits.numel() != labels.size()) {
    throw ShapeError("binary_cross_entropy: " + std::to_string(logits.numel()) + " logits for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ShapeError("binary_cross_entropy: no labels");
  const std::size_t n = labels.size();
  auto x = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = labels[i] ? 1.0 : 0.0;
    total += pos_weight * y * softplus(-x[i]) + (1.0 - y) * softplus(x[i]);
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (recording(logits)) {
    std::vector<int> y(labels.begin(), labels.end());
    Tape::active()->record("binary_cross_entropy", {logits}, out, [logits, out, y = std::move(y), pos_weight, n]() {
      const double go = out.impl()->grad[0] / static_cast<double>(n);
      Tensor l = logits;
      auto x = l.data();
      auto g = l.mutable_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double s = stable_sigmoid(x[i]);
        const double t = y[i] ? 1.0 : 0.0;
        g[i] += go * (pos_weight * t * (s - 1.0) + (1.0 - t) * s);
      }
    });
  }
  return out;
}

Tensor l1_loss(const Tensor& pred, std::span<const double> target) {
  if (pred.numel() != target.size() || target.empty()) throw ShapeError("l1_loss: prediction/target size mismatch");
  const std::size_t n = target.size();
  auto p = pred.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::abs(p[i] - target[i]);
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (recording(pred)) {
    std::vector<double> t(target.begin(), target.end());
    Tape::active()->record("l1_loss", {pred}, out, [pred, out, t = std::move(t), n]() {
      const double go = out.impl()->grad[0] / static_cast<double>(n);
      Tensor q = pred;
      auto p = q.data();
      auto g = q.mutable_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double r = p[i] - t[i];
        g[i] += go * (r > 0.0 ? 1.0 : r < 0.0 ? -1.0 : 0.0);
      }
    });
  }
  return out;
}

std::vector<double> inverse_frequency_weights(std::span<const int> labels, std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw ShapeError("class weights: label out of range");
    counts[static_cast<std::size_t>(y)] += 1.0;
  }
  std::vector<double> w(num_classes, 0.0);
  const double n = static_cast<double>(labels.size());
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] > 0.0) w[k] = n / (static_cast<double>(num_classes) * counts[k]);
  }
  return w;
}

}  // namespace nlmi
