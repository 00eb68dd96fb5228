#include "kdseq/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace kdseq {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
using NodePtr = std::shared_ptr<Node>;

template <class Backward>
Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> inputs,
                   Backward&& backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  Tape* tape = active_tape();
  if (tape) {
    bool any = false;
    for (const Tensor* t : inputs) any = any || t->requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const Tensor* t : inputs) node->inputs.push_back(t->node());
      node->backward = std::forward<Backward>(backward);
      tape->record(node);
    }
  }
  return Tensor(std::move(node));
}

Tensor make_result_n(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                     std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  Tape* tape = active_tape();
  if (tape) {
    bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (const Tensor& t : inputs) node->inputs.push_back(t.node());
      node->backward = std::move(backward);
      tape->record(node);
    }
  }
  return Tensor(std::move(node));
}

// Gradient buffer of input i, or nullptr when it takes no gradient.
double* grad_of(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  return in.ensure_grad().data();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
  if (t.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         to_string(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

// Splits a shape around `axis` into (outer, axis length, inner) extents.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size())
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         to_string(shape));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df_from_y) {
  std::vector<double> y(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_result(x.shape(), std::move(y), {&x}, [df_from_y](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xv = self.inputs[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * df_from_y(xv[i], self.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul: inner dimensions disagree, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.values().data(), m, k) * MapC(b.values().data(), k, n);
  return make_result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    MapC g(self.grad.data(), m, n);
    if (double* ga = grad_of(self, 0))
      Map(ga, m, k).noalias() += g * MapC(self.inputs[1]->value.data(), k, n).transpose();
    if (double* gb = grad_of(self, 1))
      Map(gb, k, n).noalias() += MapC(self.inputs[0]->value.data(), m, k).transpose() * g;
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const std::size_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != B || b.dim(1) != k)
    throw DimensionError("bmm: incompatible shapes " + to_string(a.shape()) + " x " + to_string(b.shape()));
  std::vector<double> out(B * m * n);
  for (std::size_t i = 0; i < B; ++i)
    Map(out.data() + i * m * n, m, n).noalias() =
        MapC(a.values().data() + i * m * k, m, k) * MapC(b.values().data() + i * k * n, k, n);
  return make_result({B, m, n}, std::move(out), {&a, &b}, [B, m, k, n](Node& self) {
    double* ga = grad_of(self, 0);
    double* gb = grad_of(self, 1);
    const double* av = self.inputs[0]->value.data();
    const double* bv = self.inputs[1]->value.data();
    for (std::size_t i = 0; i < B; ++i) {
      MapC g(self.grad.data() + i * m * n, m, n);
      if (ga) Map(ga + i * m * k, m, k).noalias() += g * MapC(bv + i * k * n, k, n).transpose();
      if (gb) Map(gb + i * k * n, k, n).noalias() += MapC(av + i * m * k, m, k).transpose() * g;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    for (std::size_t j = 0; j < 2; ++j)
      if (double* g = grad_of(self, j))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.size() != n || bias.rank() > 2 || (bias.rank() == 2 && bias.dim(0) != 1))
    throw DimensionError("add_row: bias " + to_string(bias.shape()) + " does not match rows of " +
                         to_string(x.shape()));
  std::vector<double> out(x.size());
  auto xv = x.values(), bv = bias.values();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = xv[r * n + c] + bv[c];
  return make_result(x.shape(), std::move(out), {&x, &bias}, [m, n](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < m * n; ++i) g[i] += self.grad[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) g[c] += self.grad[r * n + c];
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  return make_result(x.shape(), std::move(out), {&x}, [factor](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis, "softmax");
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < v.extent; ++k) mx = std::max(mx, xv[base + k * v.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < v.extent; ++k) {
        const double e = std::exp(xv[base + k * v.inner] - mx);
        out[base + k * v.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < v.extent; ++k) out[base + k * v.inner] /= z;
    }
  return make_result(x.shape(), std::move(out), {&x}, [v](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.extent * v.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < v.extent; ++k) {
          const std::size_t i = base + k * v.inner;
          dot += self.grad[i] * self.value[i];
        }
        for (std::size_t k = 0; k < v.extent; ++k) {
          const std::size_t i = base + k * v.inner;
          gx[i] += self.value[i] * (self.grad[i] - dot);
        }
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis, "log_softmax");
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < v.extent; ++k) mx = std::max(mx, xv[base + k * v.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < v.extent; ++k) z += std::exp(xv[base + k * v.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t k = 0; k < v.extent; ++k) out[base + k * v.inner] = xv[base + k * v.inner] - lz;
    }
  return make_result(x.shape(), std::move(out), {&x}, [v](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.extent * v.inner + in;
        double gsum = 0.0;
        for (std::size_t k = 0; k < v.extent; ++k) gsum += self.grad[base + k * v.inner];
        for (std::size_t k = 0; k < v.extent; ++k) {
          const std::size_t i = base + k * v.inner;
          gx[i] += self.grad[i] - std::exp(self.value[i]) * gsum;
        }
      }
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  Shape shape = first;
  axis_view(first, axis, "concat");
  shape[axis] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.size())
      throw DimensionError("concat: rank mismatch " + to_string(first) + " vs " + to_string(p.shape()));
    for (std::size_t d = 0; d < first.size(); ++d)
      if (d != axis && p.dim(d) != first[d])
        throw DimensionError("concat: shape mismatch " + to_string(first) + " vs " + to_string(p.shape()));
    shape[axis] += p.dim(axis);
  }
  const AxisView out_view = axis_view(shape, axis, "concat");
  std::vector<double> out(shape_size(shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * out_view.inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < out_view.outer; ++o)
      std::copy_n(pv.data() + o * chunk, chunk, out.data() + o * out_view.extent * out_view.inner + offset);
    offset += chunk;
  }
  return make_result_n(shape, std::move(out), parts, [out_view, offsets](Node& self) {
    const std::size_t row = out_view.extent * out_view.inner;
    for (std::size_t j = 0; j < self.inputs.size(); ++j) {
      double* g = grad_of(self, j);
      if (!g) continue;
      const std::size_t chunk = self.inputs[j]->value.size() / out_view.outer;
      for (std::size_t o = 0; o < out_view.outer; ++o) {
        const double* src = self.grad.data() + o * row + offsets[j];
        for (std::size_t i = 0; i < chunk; ++i) g[o * chunk + i] += src[i];
      }
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisView v = axis_view(x.shape(), axis, "slice");
  if (begin >= end || end > v.extent)
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis of length " + std::to_string(v.extent));
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * v.inner;
  const std::size_t row = v.extent * v.inner;
  const std::size_t offset = begin * v.inner;
  std::vector<double> out(v.outer * chunk);
  auto xv = x.values();
  for (std::size_t o = 0; o < v.outer; ++o) std::copy_n(xv.data() + o * row + offset, chunk, out.data() + o * chunk);
  return make_result(std::move(shape), std::move(out), {&x}, [v, chunk, row, offset](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < chunk; ++i) g[o * row + offset + i] += self.grad[o * chunk + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size())
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), {&x}, [](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor gather(const Tensor& table, std::span<const TokenId> ids) {
  require_rank(table, 2, "gather");
  if (ids.empty()) throw DimensionError("gather: empty id list");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  std::vector<double> out(ids.size() * width);
  auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows)
      throw DimensionError("gather: id " + std::to_string(ids[i]) + " out of range for table " +
                           to_string(table.shape()));
    std::copy_n(tv.data() + ids[i] * width, width, out.data() + i * width);
  }
  std::vector<TokenId> saved(ids.begin(), ids.end());
  return make_result({ids.size(), width}, std::move(out), {&table}, [saved = std::move(saved), width](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < saved.size(); ++i) {
      double* dst = g + saved[i] * width;
      const double* src = self.grad.data() + i * width;
      for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1}, {s}, {&x}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      const std::size_t n = self.inputs[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor cross_entropy(const Tensor& target_dist, const Tensor& log_probs) {
  require_same(target_dist, log_probs, "cross_entropy");
  const AxisView v = axis_view(target_dist.shape(), target_dist.rank() - 1, "cross_entropy");
  auto tv = target_dist.values();
  for (std::size_t o = 0; o < v.outer; ++o) {
    double s = 0.0;
    for (std::size_t k = 0; k < v.extent; ++k) {
      const double t = tv[o * v.extent + k];
      if (t < 0.0) throw ValidationError("cross_entropy: negative target probability");
      s += t;
    }
    if (std::abs(s - 1.0) > 1e-6)
      throw ValidationError("cross_entropy: target slice " + std::to_string(o) + " sums to " + std::to_string(s) +
                            ", not 1");
  }
  return scale(sum(mul(target_dist, log_probs)), -1.0);
}

}  // namespace kdseq
