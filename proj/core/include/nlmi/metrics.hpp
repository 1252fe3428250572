#pragma once

#include <span>
#include <string>
#include <vector>

#include "nlmi/tensor.hpp"

namespace nlmi {

/// Row-wise argmax of a [N x C] tensor (first maximum wins).
std::vector<int> argmax_rows(const Tensor& logits);

double accuracy(std::span<const int> predicted, std::span<const int> labels);

/// Mean over the classes present in `labels` of per-class recall.
double weighted_accuracy(std::span<const int> predicted, std::span<const int> labels);

/// 2PR / (P + R) for label 1; 0 when there are no true positives.
double f1_positive(std::span<const int> predicted, std::span<const int> labels);

double mae(std::span<const double> predicted, std::span<const double> target);

}  // namespace nlmi
