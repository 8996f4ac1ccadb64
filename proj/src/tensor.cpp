#include "docmae/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "docmae/errors.hpp"

namespace docmae {

namespace {

using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const Mat>;
using MapM = Eigen::Map<Mat>;

MapC view(const std::vector<Scalar>& v, std::size_t rows, std::size_t cols) {
  return MapC(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapM view(Scalar* p, std::size_t rows, std::size_t cols) {
  return MapM(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_2d(const Tensor& t, const char* op) {
  if (t.dim() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-d tensor, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

std::size_t last_extent(const Tensor& t) { return t.dim() == 0 ? 0 : t.shape().back(); }

thread_local bool grad_mode = true;

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Scalar* detail::TensorImpl::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), Scalar(0));
  return grad.data();
}

Tensor::Tensor(Shape shape, Scalar fill) : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<Scalar> values) : impl_(std::make_shared<detail::TensorImpl>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_str(shape) + " does not hold " + std::to_string(values.size()) +
                         " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
  std::vector<Scalar> values;
  std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("tensor: ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), cols}, std::move(values));
}

const Shape& Tensor::shape() const {
  static const Shape empty;
  return impl_ ? impl_->shape : empty;
}

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<Scalar> Tensor::data() { return impl_->data; }
std::span<const Scalar> Tensor::data() const { return impl_->data; }

Scalar Tensor::item() const {
  if (numel() != 1) throw ContractError("item(): tensor " + shape_str(shape()) + " is not a scalar");
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  if (flag) impl_->grad_buffer();
  return *this;
}

bool Tensor::has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }

std::span<Scalar> Tensor::grad() { return {impl_->grad_buffer(), impl_->data.size()}; }
std::span<const Scalar> Tensor::grad() const { return {impl_->grad_buffer(), impl_->data.size()}; }

void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), Scalar(0));
}

bool Tensor::is_leaf() const { return !impl_ || !impl_->backward_fn; }

Tensor Tensor::detach() const {
  Tensor out(shape(), std::vector<Scalar>(impl_->data));
  return out;
}

// ---- graph ---------------------------------------------------------------

Graph Graph::trace(const Tensor& root) {
  Graph g;
  if (!root.defined()) return g;
  std::unordered_set<detail::TensorImpl*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root.impl().get(), 0);
  seen.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::TensorImpl* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      g.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) throw ContractError("backward: loss does not depend on any trainable tensor");
  Graph g = Graph::trace(loss);
  loss.impl()->grad_buffer()[0] += Scalar(1);
  const auto& nodes = g.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (!node->backward_fn) continue;
    node->grad_buffer();
    node->backward_fn(*node);
  }
  for (detail::TensorImpl* node : nodes) {
    if (!node->backward_fn) continue;
    node->backward_fn = nullptr;
    node->inputs.clear();
    node->requires_grad = false;
    std::vector<Scalar>().swap(node->grad);
  }
}

NoGradGuard::NoGradGuard() : previous_(grad_mode) { grad_mode = false; }
NoGradGuard::~NoGradGuard() { grad_mode = previous_; }

Tensor detail::make_result(Shape shape, std::vector<Scalar> data, std::vector<Tensor> inputs, const char* op,
                           std::function<void(TensorImpl& self)> backward_fn) {
  Tensor out(std::move(shape), std::move(data));
  bool needs = grad_mode && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return wants_grad(t); });
  if (needs) {
    auto& impl = *out.impl();
    impl.requires_grad = true;
    impl.op = op;
    // Every input stays alive: backward closures read their data.
    for (auto& t : inputs)
      if (t.defined()) impl.inputs.push_back(t.impl());
    impl.backward_fn = std::move(backward_fn);
  }
  return out;
}

bool all_finite(std::span<const Scalar> values) {
  return std::all_of(values.begin(), values.end(), [](Scalar v) { return std::isfinite(v); });
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  if (b.size(0) != k) {
    throw DimensionError("matmul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " incompatible");
  }
  std::vector<Scalar> out(m * n);
  view(out.data(), m, n).noalias() = view(a.impl()->data, m, k) * view(b.impl()->data, k, n);
  auto* pa = a.impl().get();
  auto* pb = b.impl().get();
  return detail::make_result({m, n}, std::move(out), {a, b}, "matmul", [pa, pb, m, k, n](detail::TensorImpl& self) {
    auto dc = view(self.grad, m, n);
    if (pa->requires_grad) view(pa->grad_buffer(), m, k).noalias() += dc * view(pb->data, k, n).transpose();
    if (pb->requires_grad) view(pb->grad_buffer(), k, n).noalias() += view(pa->data, m, k).transpose() * dc;
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(0);
  if (b.size(1) != k) {
    throw DimensionError("matmul_nt: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " incompatible");
  }
  std::vector<Scalar> out(m * n);
  view(out.data(), m, n).noalias() = view(a.impl()->data, m, k) * view(b.impl()->data, n, k).transpose();
  auto* pa = a.impl().get();
  auto* pb = b.impl().get();
  return detail::make_result({m, n}, std::move(out), {a, b}, "matmul_nt",
                             [pa, pb, m, k, n](detail::TensorImpl& self) {
                               auto dc = view(self.grad, m, n);
                               if (pa->requires_grad)
                                 view(pa->grad_buffer(), m, k).noalias() += dc * view(pb->data, n, k);
                               if (pb->requires_grad)
                                 view(pb->grad_buffer(), n, k).noalias() += dc.transpose() * view(pa->data, m, k);
                             });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.size(0), n = a.size(1);
  std::vector<Scalar> out(m * n);
  view(out.data(), n, m) = view(a.impl()->data, m, n).transpose();
  auto* pa = a.impl().get();
  return detail::make_result({n, m}, std::move(out), {a}, "transpose", [pa, m, n](detail::TensorImpl& self) {
    view(pa->grad_buffer(), m, n) += view(self.grad, n, m).transpose();
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_2d(x, "linear");
  require_2d(weight, "linear");
  const std::size_t t = x.size(0), in = x.size(1), outw = weight.size(1);
  if (weight.size(0) != in || bias.numel() != outw) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + ", weight " + shape_str(weight.shape()) +
                         ", bias " + shape_str(bias.shape()));
  }
  std::vector<Scalar> out(t * outw);
  auto y = view(out.data(), t, outw);
  y.noalias() = view(x.impl()->data, t, in) * view(weight.impl()->data, in, outw);
  y.rowwise() += view(bias.impl()->data, 1, outw).row(0);
  auto* px = x.impl().get();
  auto* pw = weight.impl().get();
  auto* pb = bias.impl().get();
  return detail::make_result(
      {t, outw}, std::move(out), {x, weight, bias}, "linear", [px, pw, pb, t, in, outw](detail::TensorImpl& self) {
        auto dy = view(self.grad, t, outw);
        if (px->requires_grad) view(px->grad_buffer(), t, in).noalias() += dy * view(pw->data, in, outw).transpose();
        if (pw->requires_grad) view(pw->grad_buffer(), in, outw).noalias() += view(px->data, t, in).transpose() * dy;
        if (pb->requires_grad) {
          // Plain loop: Eigen's vectorised column sum depends on buffer alignment.
          std::vector<Scalar> col(outw, Scalar(0));
          for (std::size_t r = 0; r < t; ++r)
            for (std::size_t j = 0; j < outw; ++j) col[j] += self.grad[r * outw + j];
          Scalar* gb = pb->grad_buffer();
          for (std::size_t j = 0; j < outw; ++j) gb[j] += col[j];
        }
      });
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  auto* pa = a.impl().get();
  auto* pb = b.impl().get();
  return detail::make_result(a.shape(), std::move(out), {a, b}, "add", [pa, pb](detail::TensorImpl& self) {
    const std::size_t n = self.grad.size();
    if (pa->requires_grad) {
      Scalar* g = pa->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      Scalar* g = pb->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  auto* pa = a.impl().get();
  auto* pb = b.impl().get();
  return detail::make_result(a.shape(), std::move(out), {a, b}, "sub", [pa, pb](detail::TensorImpl& self) {
    const std::size_t n = self.grad.size();
    if (pa->requires_grad) {
      Scalar* g = pa->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      Scalar* g = pb->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto* pa = a.impl().get();
  auto* pb = b.impl().get();
  return detail::make_result(a.shape(), std::move(out), {a, b}, "mul", [pa, pb](detail::TensorImpl& self) {
    const std::size_t n = self.grad.size();
    if (pa->requires_grad) {
      Scalar* g = pa->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      Scalar* g = pb->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * pa->data[i];
    }
  });
}

Tensor scale(const Tensor& a, Scalar factor) {
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  auto* pa = a.impl().get();
  return detail::make_result(a.shape(), std::move(out), {a}, "scale", [pa, factor](detail::TensorImpl& self) {
    Scalar* g = pa->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_rowwise(const Tensor& x, const Tensor& row) {
  const std::size_t n = row.numel();
  if (n == 0 || last_extent(x) != n) {
    throw DimensionError("add_rowwise: row " + shape_str(row.shape()) + " does not match " + shape_str(x.shape()));
  }
  std::vector<Scalar> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + row[i % n];
  auto* px = x.impl().get();
  auto* pr = row.impl().get();
  return detail::make_result(x.shape(), std::move(out), {x, row}, "add_rowwise", [px, pr, n](detail::TensorImpl& self) {
    if (px->requires_grad) {
      Scalar* g = px->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (pr->requires_grad) {
      Scalar* g = pr->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
    }
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t n = last_extent(x);
  if (n == 0) throw DimensionError("softmax_lastdim: empty last dimension in " + shape_str(x.shape()));
  const std::size_t rows = x.numel() / n;
  std::vector<Scalar> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = x.data().data() + r * n;
    Scalar* o = out.data() + r * n;
    Scalar mx = *std::max_element(in, in + n);
    Scalar total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  auto* px = x.impl().get();
  return detail::make_result(x.shape(), std::move(out), {x}, "softmax", [px, n, rows](detail::TensorImpl& self) {
    Scalar* g = px->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const Scalar* y = self.data.data() + r * n;
      const Scalar* dy = self.grad.data() + r * n;
      Scalar dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (dy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps) {
  const std::size_t n = last_extent(x);
  if (n == 0) throw DimensionError("layer_norm: empty last dimension in " + shape_str(x.shape()));
  if (gamma.numel() != n || beta.numel() != n) {
    throw DimensionError("layer_norm: affine " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                         " does not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  std::vector<Scalar> out(x.numel());
  auto xhat = std::make_shared<std::vector<Scalar>>(x.numel());
  auto rstd = std::make_shared<std::vector<Scalar>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = x.data().data() + r * n;
    Scalar mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= Scalar(n);
    Scalar var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= Scalar(n);
    const Scalar rs = Scalar(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < n; ++j) {
      Scalar h = (in[j] - mu) * rs;
      (*xhat)[r * n + j] = h;
      out[r * n + j] = h * gamma[j] + beta[j];
    }
  }
  auto* px = x.impl().get();
  auto* pg = gamma.impl().get();
  auto* pb = beta.impl().get();
  return detail::make_result(
      x.shape(), std::move(out), {x, gamma, beta}, "layer_norm",
      [px, pg, pb, n, rows, xhat, rstd](detail::TensorImpl& self) {
        Scalar* gg = pg->requires_grad ? pg->grad_buffer() : nullptr;
        Scalar* gb = pb->requires_grad ? pb->grad_buffer() : nullptr;
        Scalar* gx = px->requires_grad ? px->grad_buffer() : nullptr;
        std::vector<Scalar> dxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
          const Scalar* dy = self.grad.data() + r * n;
          const Scalar* h = xhat->data() + r * n;
          Scalar mean_d = 0, mean_dh = 0;
          for (std::size_t j = 0; j < n; ++j) {
            if (gg) gg[j] += dy[j] * h[j];
            if (gb) gb[j] += dy[j];
            dxhat[j] = dy[j] * pg->data[j];
            mean_d += dxhat[j];
            mean_dh += dxhat[j] * h[j];
          }
          if (!gx) continue;
          mean_d /= Scalar(n);
          mean_dh /= Scalar(n);
          const Scalar rs = (*rstd)[r];
          for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += rs * (dxhat[j] - mean_d - h[j] * mean_dh);
        }
      });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  std::vector<Scalar> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out[i] = static_cast<Scalar>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  auto* px = x.impl().get();
  return detail::make_result(x.shape(), std::move(out), {x}, "gelu", [px](detail::TensorImpl& self) {
    Scalar* g = px->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = px->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * static_cast<Scalar>(cdf + v * pdf);
    }
  });
}

// ---- layout ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto* px = x.impl().get();
  return detail::make_result(std::move(shape), std::vector<Scalar>(px->data), {x}, "reshape",
                             [px](detail::TensorImpl& self) {
                               Scalar* g = px->grad_buffer();
                               for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                             });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_2d(x, "slice_cols");
  const std::size_t rows = x.size(0), cols = x.size(1);
  if (start + count > cols) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_str(x.shape()));
  }
  std::vector<Scalar> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.data().data() + r * cols + start, count, out.data() + r * count);
  auto* px = x.impl().get();
  return detail::make_result({rows, count}, std::move(out), {x}, "slice_cols",
                             [px, rows, cols, start, count](detail::TensorImpl& self) {
                               Scalar* g = px->grad_buffer();
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t c = 0; c < count; ++c)
                                   g[r * cols + start + c] += self.grad[r * count + c];
                             });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts[0].size(0);
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.size(0) != rows) throw DimensionError("concat_cols: row count mismatch " + shape_str(p.shape()));
    cols += p.size(1);
  }
  std::vector<Scalar> out(rows * cols);
  std::vector<detail::TensorImpl*> ptrs;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.size(1);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(p.data().data() + r * w, w, out.data() + r * cols + off);
    off += w;
    ptrs.push_back(p.impl().get());
  }
  return detail::make_result({rows, cols}, std::move(out), parts, "concat_cols",
                             [ptrs, rows, cols](detail::TensorImpl& self) {
                               std::size_t off = 0;
                               for (auto* p : ptrs) {
                                 const std::size_t w = p->shape[1];
                                 if (p->requires_grad) {
                                   Scalar* g = p->grad_buffer();
                                   for (std::size_t r = 0; r < rows; ++r)
                                     for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r * cols + off + c];
                                 }
                                 off += w;
                               }
                             });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_2d(x, "gather_rows");
  const std::size_t n = x.size(0), cols = x.size(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (std::size_t r : idx)
    if (r >= n) throw ContractError("gather_rows: index " + std::to_string(r) + " out of range for " + shape_str(x.shape()));
  std::vector<Scalar> out(idx.size() * cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(x.data().data() + idx[i] * cols, cols, out.data() + i * cols);
  auto* px = x.impl().get();
  Shape shape{idx.size(), cols};
  return detail::make_result(std::move(shape), std::move(out), {x}, "gather_rows",
                             [px, idx = std::move(idx), cols](detail::TensorImpl& self) {
                               Scalar* g = px->grad_buffer();
                               for (std::size_t i = 0; i < idx.size(); ++i)
                                 for (std::size_t c = 0; c < cols; ++c) g[idx[i] * cols + c] += self.grad[i * cols + c];
                             });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double total = 0;
  for (Scalar v : x.data()) total += v;
  auto* px = x.impl().get();
  return detail::make_result({1}, {static_cast<Scalar>(total)}, {x}, "sum", [px](detail::TensorImpl& self) {
    Scalar* g = px->grad_buffer();
    for (std::size_t i = 0; i < px->data.size(); ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(x), Scalar(1) / Scalar(x.numel()));
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse_loss");
  if (a.numel() == 0) throw ContractError("mse_loss: empty tensors");
  const std::size_t n = a.numel();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(a[i]) - double(b[i]);
    total += d * d;
  }
  auto* pa = a.impl().get();
  auto* pb = b.impl().get();
  return detail::make_result({1}, {static_cast<Scalar>(total / double(n))}, {a, b}, "mse_loss",
                             [pa, pb, n](detail::TensorImpl& self) {
                               const Scalar k = Scalar(2) * self.grad[0] / Scalar(n);
                               Scalar* ga = pa->requires_grad ? pa->grad_buffer() : nullptr;
                               Scalar* gb = pb->requires_grad ? pb->grad_buffer() : nullptr;
                               for (std::size_t i = 0; i < n; ++i) {
                                 const Scalar d = k * (pa->data[i] - pb->data[i]);
                                 if (ga) ga[i] += d;
                                 if (gb) gb[i] -= d;
                               }
                             });
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1_loss");
  if (a.numel() == 0) throw ContractError("l1_loss: empty tensors");
  const std::size_t n = a.numel();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::abs(double(a[i]) - double(b[i]));
  auto* pa = a.impl().get();
  auto* pb = b.impl().get();
  return detail::make_result({1}, {static_cast<Scalar>(total / double(n))}, {a, b}, "l1_loss",
                             [pa, pb, n](detail::TensorImpl& self) {
                               const Scalar k = self.grad[0] / Scalar(n);
                               Scalar* ga = pa->requires_grad ? pa->grad_buffer() : nullptr;
                               Scalar* gb = pb->requires_grad ? pb->grad_buffer() : nullptr;
                               for (std::size_t i = 0; i < n; ++i) {
                                 const Scalar diff = pa->data[i] - pb->data[i];
                                 const Scalar s = diff > 0 ? k : (diff < 0 ? -k : Scalar(0));
                                 if (ga) ga[i] += s;
                                 if (gb) gb[i] -= s;
                               }
                             });
}

}  // namespace docmae
