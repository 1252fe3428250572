#include "nlmi/tensor.hpp"

#include <cmath>
#include <sstream>

#include "nlmi/errors.hpp"

namespace nlmi {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->value.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " + std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.front().size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor::matrix: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from({r, c}, std::move(values), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data()[i * n + i] = 1.0;
  return t;
}

std::size_t Tensor::rows() const { return impl_->shape.empty() ? 1 : impl_->shape.front(); }

std::size_t Tensor::cols() const {
  if (impl_->shape.empty()) return 1;
  std::size_t n = 1;
  for (std::size_t i = 1; i < impl_->shape.size(); ++i) n *= impl_->shape[i];
  return n;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->value[0];
}

std::span<const double> Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->value.size(), 0.0); }

Tensor Tensor::clone() const { return from(impl_->shape, impl_->value, impl_->requires_grad); }

void Tensor::check_finite(const std::string& where) const {
  for (std::size_t i = 0; i < impl_->value.size(); ++i) {
    if (!std::isfinite(impl_->value[i])) {
      throw NumericalError(where + ": non-finite value " + std::to_string(impl_->value[i]) + " at flat index " +
                           std::to_string(i) + " of tensor " + shape_str(impl_->shape));
    }
  }
}

}  // namespace nlmi
