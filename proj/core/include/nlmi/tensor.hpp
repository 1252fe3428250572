#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nlmi {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
  bool is_leaf = true;
};

/// Dense row-major float64 tensor with shared-handle semantics.
///
/// Copying a Tensor copies the handle, not the buffer; use clone() for a
/// deep copy. A tensor participates in differentiation when requires_grad
/// is set and it is used by an op while a Tape is active.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Builds a rows x cols matrix from nested rows. All rows must have equal length.
  static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->value.size(); }
  /// Leading dimension; 1 for scalars.
  std::size_t rows() const;
  /// Product of trailing dimensions; 1 for scalars.
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->value; }
  std::span<double> data() { return impl_->value; }
  double operator[](std::size_t i) const { return impl_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return impl_->value[r * cols() + c]; }
  /// Value of a one-element tensor.
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool is_leaf() const { return impl_->is_leaf; }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; zeros of matching shape if no backward pass touched it yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Deep copy of the values, detached from any history.
  Tensor clone() const;

  /// True when both handles refer to the same buffer.
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

  TensorImpl* impl() const { return impl_.get(); }

  /// Throws NumericalError naming `where` if any value is NaN or infinite.
  void check_finite(const std::string& where) const;

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Ordered record of the primitive ops executed while the tape is active.
///
/// Each entry keeps its inputs, its output and a closure that propagates the
/// output gradient into the inputs. Entries are appended in execution order,
/// so inputs always precede the ops that consume them.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// The tape ops currently record onto, or nullptr.
  static Tape* active();

  void record(std::string name, std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  /// Reverse pass from a scalar loss.
  ///
  /// Intermediate gradients are reset at the start of every call; leaf
  /// gradients accumulate. Calling backward() twice without zero_grad() on
  /// the leaves therefore doubles their gradients.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  const std::string& op_name(std::size_t i) const { return entries_[i].name; }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::string name;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

/// Activates a tape for the current thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording for the current thread (used by finite differences and evaluation).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// Convenience for ad-hoc use: runs backward on the active tape.
void backward(const Tensor& loss);

}  // namespace nlmi
