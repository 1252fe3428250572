#pragma once

#include <span>
#include <vector>

#include "nlmi/tensor.hpp"

namespace nlmi {

/// Weighted mean negative log-likelihood of softmax(logits):
/// sum_i w[y_i] * -log p_i[y_i] / sum_i w[y_i]. Empty `class_weights` means all ones.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const double> class_weights = {});

/// Mean of -(pos_weight * y * log sigmoid(x) + (1 - y) * log(1 - sigmoid(x))).
/// `logits` has one entry per label ([E] or [E x 1]).
Tensor binary_cross_entropy(const Tensor& logits, std::span<const int> labels, double pos_weight = 1.0);

/// Mean absolute error; the subgradient at zero residual is 0.
Tensor l1_loss(const Tensor& pred, std::span<const double> target);

/// w_c = n / (C * n_c) with C = num_classes for classes present in `labels`,
/// 0 for absent ones.
std::vector<double> inverse_frequency_weights(std::span<const int> labels, std::size_t num_classes);

}  // namespace nlmi
