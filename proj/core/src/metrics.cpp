#include "nlmi/metrics.hpp"

#include <cmath>
#include <map>

#include "nlmi/errors.hpp"

namespace nlmi {

namespace {
void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": prediction/label size mismatch");
  if (a == 0) throw ShapeError(std::string(what) + ": empty input");
}
}  // namespace

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.rows(), c = logits.cols();
  std::vector<int> out(n);
  auto x = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (x[i * c + k] > x[i * c + best]) best = k;
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  require_same_size(predicted.size(), labels.size(), "accuracy");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double weighted_accuracy(std::span<const int> predicted, std::span<const int> labels) {
  require_same_size(predicted.size(), labels.size(), "weighted_accuracy");
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // label -> (hits, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [hit, total] = per_class[labels[i]];
    ++total;
    hit += predicted[i] == labels[i];
  }
  double recall_sum = 0.0;
  for (const auto& [label, ht] : per_class) recall_sum += static_cast<double>(ht.first) / static_cast<double>(ht.second);
  return recall_sum / static_cast<double>(per_class.size());
}

double f1_positive(std::span<const int> predicted, std::span<const int> labels) {
  require_same_size(predicted.size(), labels.size(), "f1_positive");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] == 1, y = labels[i] == 1;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
  }
  if (tp == 0) return 0.0;
  const double precision = tp / (tp + fp);
  const double recall = tp / (tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double mae(std::span<const double> predicted, std::span<const double> target) {
  require_same_size(predicted.size(), target.size(), "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) total += std::abs(predicted[i] - target[i]);
  return total / static_cast<double>(target.size());
}

}  // namespace nlmi
