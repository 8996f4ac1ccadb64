#pragma once

// Dense row-major tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a shared handle: copying it aliases the same storage and the
// same place in the graph, the way framework tensors behave. Use clone() for
// an independent copy and detach() to cut the graph.
//
// The scalar type is fixed at build time. The regular library trains in
// 32-bit; the `docmae64` variant (DOCMAE_DOUBLE) exists for gradient checks.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace docmae {

#ifdef DOCMAE_DOUBLE
using Scalar = double;
#else
using Scalar = float;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<Scalar> data;
  std::vector<Scalar> grad;  // empty until needed
  bool requires_grad = false;

  // Graph record. Empty for leaves.
  const char* op = nullptr;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(TensorImpl& self)> backward_fn;

  Scalar* grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));
  Tensor(Shape shape, std::vector<Scalar> values);
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), Scalar(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), Scalar(1)); }
  static Tensor scalar(Scalar value) { return Tensor(Shape{1}, value); }
  static Tensor matrix(std::initializer_list<std::initializer_list<Scalar>> rows);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<Scalar> data();
  std::span<const Scalar> data() const;
  Scalar& operator[](std::size_t i) { return data()[i]; }
  Scalar operator[](std::size_t i) const { return data()[i]; }
  Scalar item() const;

  bool requires_grad() const;
  // Marks a leaf as trainable and allocates a zeroed gradient slot.
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<Scalar> grad();
  std::span<const Scalar> grad() const;
  void zero_grad();

  bool is_leaf() const;
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Topologically ordered record of the ops that produced a scalar loss.
class Graph {
 public:
  static Graph trace(const Tensor& root);
  // Inputs precede outputs.
  const std::vector<detail::TensorImpl*>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<detail::TensorImpl*> nodes_;
};

// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Populates .grad of every requires_grad leaf reachable from `loss`
// (accumulating into existing grads) and releases the graph.
void backward(const Tensor& loss);

// ---- ops -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k] x [n,k]^T
Tensor transpose(const Tensor& a);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);  // x[T,in] w[in,out] b[out]

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar factor);
Tensor add_rowwise(const Tensor& x, const Tensor& row);  // row broadcast over leading dims

Tensor softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps = Scalar(1e-6));
Tensor gelu(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse_loss(const Tensor& a, const Tensor& b);
Tensor l1_loss(const Tensor& a, const Tensor& b);

bool all_finite(std::span<const Scalar> values);

namespace detail {

// Builds an op result. `backward_fn` is dropped when no input needs grad.
Tensor make_result(Shape shape, std::vector<Scalar> data, std::vector<Tensor> inputs, const char* op,
                   std::function<void(TensorImpl& self)> backward_fn);

inline bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

}  // namespace detail

}  // namespace docmae
