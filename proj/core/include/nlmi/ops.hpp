#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nlmi/tensor.hpp"

// Differentiable primitives. Every op computes its value eagerly and, when a
// Tape is active and some input requires grad, records a backward rule.
//
// Broadcasting rule (add/sub/mul/div): `b` either has exactly `a`'s shape, is
// a one-element tensor, or matches `a` with the leading dimension dropped
// (shape [n] or [1 x n] against [m x n]), in which case `b` is reused for every
// row of `a` and its gradient is summed over rows. Nothing else broadcasts.

namespace nlmi {

/// Rows of a [E x d] tensor grouped by segment with a canonical order inside
/// each segment. segment s owns order[offsets[s] .. offsets[s+1]).
struct SegmentIndex {
  std::size_t num_segments = 0;
  std::vector<std::size_t> offsets;  // num_segments + 1 entries
  std::vector<std::size_t> order;    // row ids, grouped by segment

  std::size_t count(std::size_t s) const { return offsets[s + 1] - offsets[s]; }

  /// Groups rows by `segment[i]`; rows inside a segment are sorted by
  /// (`key[i]`, i). Passing the source node id as key makes every
  /// per-destination sum independent of edge storage order.
  static SegmentIndex build(std::size_t num_segments, std::span<const std::size_t> segment,
                            std::span<const std::size_t> key);
};

namespace ops {

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Hadamard product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

/// max(x, 0); derivative at 0 is taken as 0.
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);

/// Column-wise concatenation of two matrices with equal row counts.
Tensor concat_cols(const Tensor& a, const Tensor& b);

/// Sum over the leading dimension: [m x n] -> [n].
Tensor sum_rows(const Tensor& a);
/// Mean over the leading dimension: [m x n] -> [n].
Tensor mean_rows(const Tensor& a);
/// Sum of every element -> scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// out[i] = a[index[i]] row-wise: [N x d] -> [len(index) x d].
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);

/// out[s] = sum over rows r of segment s, accumulated in the index's canonical
/// order: [E x d] -> [num_segments x d]. Empty segments give zero rows.
Tensor segment_sum(const Tensor& a, const SegmentIndex& index);

/// out[i] = coeff[i] * a[i] row-wise; coefficients are constants.
Tensor scale_rows(const Tensor& a, std::span<const double> coeff);

}  // namespace ops
}  // namespace nlmi
