#include "nlmi/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nlmi/errors.hpp"

namespace nlmi {

SegmentIndex SegmentIndex::build(std::size_t num_segments, std::span<const std::size_t> segment,
                                 std::span<const std::size_t> key) {
  if (segment.size() != key.size()) throw ShapeError("SegmentIndex: segment/key length mismatch");
  SegmentIndex idx;
  idx.num_segments = num_segments;
  idx.offsets.assign(num_segments + 1, 0);
  for (auto s : segment) {
    if (s >= num_segments) throw ShapeError("SegmentIndex: segment id out of range");
    ++idx.offsets[s + 1];
  }
  std::partial_sum(idx.offsets.begin(), idx.offsets.end(), idx.offsets.begin());
  idx.order.resize(segment.size());
  std::iota(idx.order.begin(), idx.order.end(), std::size_t{0});
  std::stable_sort(idx.order.begin(), idx.order.end(), [&](std::size_t a, std::size_t b) {
    if (segment[a] != segment[b]) return segment[a] < segment[b];
    return key[a] < key[b];
  });
  return idx;
}

namespace ops {

namespace {

std::span<double> grad_of(const Tensor& t) {
  auto* impl = t.impl();
  if (impl->grad.empty()) impl->grad.assign(impl->value.size(), 0.0);
  return impl->grad;
}

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::Same;
  if (b.numel() == 1) return Broadcast::Scalar;
  if (a.rank() >= 1 && b.numel() == a.cols()) {
    const Shape& bs = b.shape();
    Shape tail(a.shape().begin() + 1, a.shape().end());
    if (bs == tail || (bs.size() == tail.size() + 1 && bs.front() == 1 && Shape(bs.begin() + 1, bs.end()) == tail)) {
      return Broadcast::Row;
    }
  }
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b.shape()) + " against " +
                   shape_str(a.shape()));
}

inline std::size_t b_index(Broadcast mode, std::size_t i, std::size_t cols) {
  switch (mode) {
    case Broadcast::Same:
      return i;
    case Broadcast::Row:
      return i % cols;
    case Broadcast::Scalar:
      return 0;
  }
  return i;
}

// Shared driver for the four broadcasting binary ops. `fwd(x, y)` gives the
// value, `dx(x, y, out)` and `dy(x, y, out)` the local partial derivatives.
template <typename Fwd, typename Dx, typename Dy>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Dx dx, Dy dy) {
  const Broadcast mode = broadcast_mode(a, b, name);
  const std::size_t n = a.numel();
  const std::size_t cols = a.cols();
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[i], bv[b_index(mode, i, cols)]);
  if (recording({&a, &b})) {
    Tape::active()->record(name, {a, b}, out, [a, b, out, mode, n, cols, dx, dy]() {
      auto go = out.impl()->grad;
      auto av = a.data();
      auto bv = b.data();
      auto ov = out.data();
      if (a.requires_grad()) {
        auto ga = grad_of(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * dx(av[i], bv[b_index(mode, i, cols)], ov[i]);
      }
      if (b.requires_grad()) {
        auto gb = grad_of(b);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = b_index(mode, i, cols);
          gb[j] += go[i] * dy(av[i], bv[j], ov[i]);
        }
      }
    });
  }
  return out;
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& a, Fwd fwd, Deriv deriv) {
  const std::size_t n = a.numel();
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[i]);
  if (recording({&a})) {
    Tape::active()->record(name, {a}, out, [a, out, n, deriv]() {
      const auto& go = out.impl()->grad;
      auto av = a.data();
      auto ov = out.data();
      auto ga = grad_of(a);
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * deriv(av[i], ov[i]);
    });
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  // Every output entry accumulates over the inner index in ascending order,
  // starting from zero, so results do not depend on blocking or vector width.
  Tensor out = Tensor::zeros({m, n});
  {
    const double* __restrict av = a.data().data();
    const double* __restrict bv = b.data().data();
    double* __restrict ov = out.data().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double x = av[i * k + p];
        for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += x * bv[p * n + j];
      }
  }
  if (recording({&a, &b})) {
    Tape::active()->record("matmul", {a, b}, out, [a, b, out, m, k, n]() {
      const double* __restrict go = out.impl()->grad.data();
      const double* __restrict av = a.data().data();
      const double* __restrict bv = b.data().data();
      if (a.requires_grad()) {
        // ga = go * b^T, through a transposed copy of b so the inner loop is contiguous.
        std::vector<double> bt(n * k);
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = bv[p * n + j];
        double* __restrict ga = grad_of(a).data();
        const double* __restrict btv = bt.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = go[i * n + j];
            for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g * btv[j * k + p];
          }
      }
      if (b.requires_grad()) {
        double* __restrict gb = grad_of(b).data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double x = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += x * go[i * n + j];
          }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double z = std::exp(x);
        return z / (1.0 + z);
      },
      [](double, double o) { return o * (1.0 - o); });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double o) { return 0.5 / o; });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_matrix(a, "concat_cols");
  require_matrix(b, "concat_cols");
  const std::size_t m = a.shape()[0];
  if (b.shape()[0] != m) {
    throw ShapeError("concat_cols: row counts differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t ca = a.shape()[1], cb = b.shape()[1], c = ca + cb;
  Tensor out = Tensor::zeros({m, c});
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.data();
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(av.begin() + r * ca, ca, ov.begin() + r * c);
    std::copy_n(bv.begin() + r * cb, cb, ov.begin() + r * c + ca);
  }
  if (recording({&a, &b})) {
    Tape::active()->record("concat_cols", {a, b}, out, [a, b, out, m, ca, cb, c]() {
      const auto& go = out.impl()->grad;
      if (a.requires_grad()) {
        auto ga = grad_of(a);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += go[r * c + j];
      }
      if (b.requires_grad()) {
        auto gb = grad_of(b);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += go[r * c + ca + j];
      }
    });
  }
  return out;
}

Tensor sum_rows(const Tensor& a) {
  if (a.rank() == 0) throw ShapeError("sum_rows: scalar input");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros(Shape(a.shape().begin() + 1, a.shape().end()));
  auto av = a.data();
  auto ov = out.data();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < n; ++j) ov[j] += av[r * n + j];
  if (recording({&a})) {
    Tape::active()->record("sum_rows", {a}, out, [a, out, m, n]() {
      const auto& go = out.impl()->grad;
      auto ga = grad_of(a);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += go[j];
    });
  }
  return out;
}

Tensor mean_rows(const Tensor& a) {
  if (a.rows() == 0) throw ShapeError("mean_rows: no rows");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (recording({&a})) {
    Tape::active()->record("sum", {a}, out, [a, out]() {
      const double go = out.impl()->grad[0];
      for (double& g : grad_of(a)) g += go;
    });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  if (a.rank() == 0) throw ShapeError("gather_rows: scalar input");
  const std::size_t n = a.rows(), d = a.cols();
  Shape shape = a.shape();
  shape[0] = index.size();
  Tensor out = Tensor::zeros(shape);
  auto av = a.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of range");
    std::copy_n(av.begin() + index[i] * d, d, ov.begin() + i * d);
  }
  if (recording({&a})) {
    std::vector<std::size_t> idx(index.begin(), index.end());
    Tape::active()->record("gather_rows", {a}, out, [a, out, idx = std::move(idx), d]() {
      const auto& go = out.impl()->grad;
      auto ga = grad_of(a);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) ga[idx[i] * d + j] += go[i * d + j];
    });
  }
  return out;
}

Tensor segment_sum(const Tensor& a, const SegmentIndex& index) {
  if (a.rank() == 0) throw ShapeError("segment_sum: scalar input");
  if (a.rows() != index.order.size()) {
    throw ShapeError("segment_sum: " + std::to_string(a.rows()) + " rows but index covers " +
                     std::to_string(index.order.size()));
  }
  const std::size_t d = a.cols();
  Shape shape = a.shape();
  shape[0] = index.num_segments;
  Tensor out = Tensor::zeros(shape);
  auto av = a.data();
  auto ov = out.data();
  for (std::size_t s = 0; s < index.num_segments; ++s) {
    double* dst = ov.data() + s * d;
    for (std::size_t k = index.offsets[s]; k < index.offsets[s + 1]; ++k) {
      const double* src = av.data() + index.order[k] * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  }
  if (recording({&a})) {
    Tape::active()->record("segment_sum", {a}, out, [a, out, index, d]() {
      const auto& go = out.impl()->grad;
      auto ga = grad_of(a);
      for (std::size_t s = 0; s < index.num_segments; ++s)
        for (std::size_t k = index.offsets[s]; k < index.offsets[s + 1]; ++k)
          for (std::size_t j = 0; j < d; ++j) ga[index.order[k] * d + j] += go[s * d + j];
    });
  }
  return out;
}

Tensor scale_rows(const Tensor& a, std::span<const double> coeff) {
  if (a.rank() == 0 || a.rows() != coeff.size()) {
    throw ShapeError("scale_rows: " + std::to_string(coeff.size()) + " coefficients for tensor " +
                     shape_str(a.shape()));
  }
  const std::size_t m = a.rows(), d = a.cols();
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.data();
  auto ov = out.data();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < d; ++j) ov[r * d + j] = coeff[r] * av[r * d + j];
  if (recording({&a})) {
    std::vector<double> c(coeff.begin(), coeff.end());
    Tape::active()->record("scale_rows", {a}, out, [a, out, c = std::move(c), m, d]() {
      const auto& go = out.impl()->grad;
      auto ga = grad_of(a);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < d; ++j) ga[r * d + j] += c[r] * go[r * d + j];
    });
  }
  return out;
}

}  // namespace ops
}  // namespace nlmi
