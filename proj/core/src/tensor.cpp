#include "kdseq/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace kdseq {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

static void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + to_string(shape));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<detail::Node>();
  node->value.assign(shape_size(shape), fill);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_size(shape) != values.size())
    throw DimensionError("shape " + to_string(shape) + " needs " + std::to_string(shape_size(shape)) +
                         " values, got " + std::to_string(values.size()));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on non-scalar tensor of shape " + to_string(shape()));
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return from(shape(), node_->value, requires_grad()); }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw DimensionError("backward needs a scalar loss, got " +
                         (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
  auto& seed = loss.node()->ensure_grad();
  seed[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& node = **it;
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node);
  }
}

void backward(Tape& tape, const Tensor& loss) { tape.backward(loss); }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

}  // namespace kdseq
