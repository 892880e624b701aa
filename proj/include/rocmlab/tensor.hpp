#pragma once

// Reverse-mode automatic differentiation over dense row-major arrays.
//
// Operations record onto the thread's active Tape (see TapeScope) whenever at
// least one input requires a gradient. Without an active tape every result is
// a constant, which doubles as "no-grad" mode for rollouts and evaluation.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rocmlab {

#ifdef ROCMLAB_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tape;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until first accumulation
  bool requires_grad = false;
  Tape* tape = nullptr;  // set when this tensor is the output of a recorded node
  std::size_t node_index = 0;

  void accumulate(std::size_t i, Real g) {
    if (grad.empty()) grad.assign(data.size(), Real{0});
    grad[i] += g;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), Real{0});
  }
};

using ImplPtr = std::shared_ptr<TensorImpl>;

}  // namespace detail

class Tensor {
 public:
  /// Scalar constant zero.
  Tensor();

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<Real> values);
  static Tensor from(Shape shape, std::span<const double> values);
  /// A leaf that accumulates gradient on backward.
  static Tensor parameter(Shape shape, std::vector<Real> values);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t size(std::size_t axis) const;

  std::span<const Real> data() const { return impl_->data; }
  Real item() const;
  Real operator[](std::size_t flat_index) const { return impl_->data[flat_index]; }

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->tape == nullptr; }
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; all zeros when nothing has been accumulated yet.
  std::vector<Real> grad() const;
  void zero_grad();
  void set_requires_grad(bool flag);

  /// Same values, disconnected from any tape.
  Tensor detach() const;
  Tensor clone() const;

  /// Writable view of the values. Only leaves may be mutated: a tensor that
  /// is the output of a recorded node stays immutable until the tape clears.
  std::span<Real> mutable_data();

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const detail::ImplPtr& impl() const { return impl_; }
  explicit Tensor(detail::ImplPtr impl) : impl_(std::move(impl)) {}

 private:
  detail::ImplPtr impl_;
};

/// Ordered log of recorded operations. Confined to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void(const detail::TensorImpl& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  void record(const detail::ImplPtr& out, BackwardFn fn);
  void backward(const Tensor& loss);
  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    detail::ImplPtr out;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
};

/// Installs a tape as the calling thread's active tape for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  ~TapeScope();

 private:
  Tape* previous_;
};

/// Temporarily disables recording on this thread.
class NoGradScope {
 public:
  NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;
  ~NoGradScope();

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Backpropagates from a scalar loss on the active tape. A loss that does not
/// require grad (a constant) is a no-op.
void backward(const Tensor& loss);

enum class Elementwise { Add, Sub, Mul, Div, Exp, Log, Tanh, Square, Sqrt, Neg, Softplus };

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor* b = nullptr);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor neg(const Tensor& a);
/// log(1 + exp(a)), evaluated without overflow.
Tensor softplus(const Tensor& a);
/// Clamps to [lo, hi]; gradient passes only inside the interval.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator+(const Tensor& a, double s);
Tensor operator+(double s, const Tensor& a);
Tensor operator-(const Tensor& a, double s);
Tensor operator-(double s, const Tensor& a);
Tensor operator*(const Tensor& a, double s);
Tensor operator*(double s, const Tensor& a);
Tensor operator/(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);

enum class Reduction { Sum, Mean };

/// Reduces over `axes` (removed from the result). An empty axis list is the
/// identity.
Tensor reduce(Reduction kind, const Tensor& a, std::span<const int> axes);
Tensor sum(const Tensor& a, std::initializer_list<int> axes);
Tensor mean(const Tensor& a, std::initializer_list<int> axes);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
/// Concatenates 2-D tensors with equal row counts along columns.
Tensor concat_cols(std::span<const Tensor> parts);
/// Row lookup into a 2-D table.
Tensor gather_rows(const Tensor& table, std::span<const int> rows);

/// Max over coordinates of |autodiff - central difference| / max(1, |central difference|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

/// Same check over every entry of every tensor in `params`. The parameters
/// are perturbed in place and restored.
double grad_check_params(const std::function<Tensor()>& f, std::vector<Tensor>& params,
                         double h = 1e-5);

}  // namespace rocmlab
