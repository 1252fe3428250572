#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "nlmi/errors.hpp"
#include "nlmi/tensor.hpp"

namespace nlmi {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::string name, std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
  output.impl()->is_leaf = false;
  output.set_requires_grad(true);
  entries_.push_back(Entry{std::move(name), std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!std::isfinite(loss.item())) throw NumericalError("backward: loss is not finite");

  if (loss.is_leaf()) {
    if (loss.requires_grad()) {
      Tensor leaf = loss;
      leaf.mutable_grad()[0] += 1.0;
    }
    return;
  }

  bool found = false;
  for (auto& e : entries_) {
    e.output.impl()->grad.assign(e.output.numel(), 0.0);
    found = found || e.output.same(loss);
  }
  if (!found) throw std::logic_error("backward: loss was not produced on this tape");

  loss.impl()->grad[0] = 1.0;
  std::unordered_set<const TensorImpl*> live{loss.impl()};
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!live.contains(it->output.impl())) continue;
    it->backward();
    for (const auto& in : it->inputs) {
      if (in.requires_grad()) live.insert(in.impl());
    }
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (!tape) throw std::logic_error("backward: no active tape");
  tape->backward(loss);
}

}  // namespace nlmi
