#include "rocmlab/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace rocmlab {

using detail::ImplPtr;
using detail::TensorImpl;

namespace {

thread_local Tape* g_active_tape = nullptr;

ImplPtr make_impl(Shape shape, std::vector<Real> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return impl;
}

bool needs_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->requires_grad()) return true;
  }
  return false;
}

Tensor finish(ImplPtr out, bool record, Tape::BackwardFn fn) {
  if (record) {
    out->requires_grad = true;
    g_active_tape->record(out, std::move(fn));
  }
  return Tensor(std::move(out));
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t da = i < n - a.size() ? 1 : a[i - (n - a.size())];
    const std::size_t db = i < n - b.size() ? 1 : b[i - (n - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// Per-output-axis strides of an input aligned on trailing dimensions; size-1
// and missing axes get stride 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t in_axis = in.size() - 1 - k;
    const std::size_t out_axis = out.size() - 1 - k;
    strides[out_axis] = in[in_axis] == 1 ? 0 : stride;
    stride *= in[in_axis];
  }
  return strides;
}

// Calls fn(out_index, a_index, b_index) for every output element.
template <typename Fn>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, Fn&& fn) {
  const std::size_t total = shape_numel(out);
  if (sa == out && sb == out) {
    for (std::size_t i = 0; i < total; ++i) fn(i, i, i);
    return;
  }
  const auto st_a = broadcast_strides(sa, out);
  const auto st_b = broadcast_strides(sb, out);
  const std::size_t nd = out.size();
  std::vector<std::size_t> idx(nd, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    fn(i, ia, ib);
    for (std::size_t d = nd; d-- > 0;) {
      ++idx[d];
      ia += st_a[d];
      ib += st_b[d];
      if (idx[d] < out[d]) break;
      ia -= st_a[d] * idx[d];
      ib -= st_b[d] * idx[d];
      idx[d] = 0;
    }
  }
}

template <typename Fwd, typename GradA, typename GradB>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, GradA ga, GradB gb) {
  Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  std::vector<Real> out(shape_numel(out_shape));
  const auto& da = a.impl()->data;
  const auto& db = b.impl()->data;
  for_each_broadcast(out_shape, a.shape(), b.shape(),
                     [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = fwd(da[ia], db[ib]); });
  const bool record = needs_record({&a, &b});
  auto impl = make_impl(out_shape, std::move(out));
  ImplPtr pa = a.impl();
  ImplPtr pb = b.impl();
  return finish(impl, record, [pa, pb, ga, gb](const TensorImpl& o) {
    const bool need_a = pa->requires_grad;
    const bool need_b = pb->requires_grad;
    if (need_a) pa->ensure_grad();
    if (need_b) pb->ensure_grad();
    for_each_broadcast(o.shape, pa->shape, pb->shape, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      const Real g = o.grad[i];
      if (need_a) pa->grad[ia] += ga(g, pa->data[ia], pb->data[ib], o.data[i]);
      if (need_b) pb->grad[ib] += gb(g, pa->data[ia], pb->data[ib], o.data[i]);
    });
  });
}

template <typename Fwd, typename Grad>
Tensor unary_op(const Tensor& a, Fwd fwd, Grad grad) {
  const auto& da = a.impl()->data;
  std::vector<Real> out(da.size());
  for (std::size_t i = 0; i < da.size(); ++i) out[i] = fwd(da[i]);
  const bool record = needs_record({&a});
  auto impl = make_impl(a.shape(), std::move(out));
  ImplPtr pa = a.impl();
  return finish(impl, record, [pa, grad](const TensorImpl& o) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::size_t i = 0; i < o.data.size(); ++i) pa->grad[i] += grad(o.grad[i], pa->data[i], o.data[i]);
  });
}

void check_nonnegative(const Tensor& a, const char* op) {
  for (Real v : a.data()) {
    if (v < 0 || std::isnan(v)) {
      std::ostringstream os;
      os << op << " of negative input " << v;
      throw DomainError(os.str());
    }
  }
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------- Tensor

Tensor::Tensor() : impl_(make_impl({}, {Real{0}})) {}

Tensor Tensor::scalar(double value) { return Tensor(make_impl({}, {static_cast<Real>(value)})); }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<Real>(n, static_cast<Real>(value))));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  return Tensor(make_impl(std::move(shape), std::move(values)));
}

Tensor Tensor::from(Shape shape, std::span<const double> values) {
  return from(std::move(shape), std::vector<Real>(values.begin(), values.end()));
}

Tensor Tensor::parameter(Shape shape, std::vector<Real> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.impl_->requires_grad = true;
  return t;
}

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return impl_->shape[axis];
}

Real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

std::vector<Real> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<Real>(numel(), Real{0});
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad on a recorded (non-leaf) tensor");
  impl_->requires_grad = flag;
  if (!flag) impl_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(make_impl(impl_->shape, impl_->data)); }

Tensor Tensor::clone() const {
  auto impl = make_impl(impl_->shape, impl_->data);
  impl->requires_grad = is_leaf() && impl_->requires_grad;
  return Tensor(impl);
}

std::span<Real> Tensor::mutable_data() {
  if (!is_leaf()) throw std::logic_error("in-place mutation of a tape-recorded tensor");
  return impl_->data;
}

// ---------------------------------------------------------------- Tape

Tape::~Tape() { clear(); }

void Tape::record(const ImplPtr& out, BackwardFn fn) {
  out->tape = this;
  out->node_index = nodes_.size();
  nodes_.push_back(Node{out, std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  const auto& impl = loss.impl();
  if (impl->tape != this) throw std::logic_error("loss is not recorded on this tape");
  const std::size_t last = impl->node_index;
  for (std::size_t i = 0; i <= last; ++i) nodes_[i].out->grad.assign(nodes_[i].out->data.size(), Real{0});
  impl->grad[0] = Real{1};
  for (std::size_t i = last + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    const auto& g = node.out->grad;
    if (std::all_of(g.begin(), g.end(), [](Real v) { return v == Real{0}; })) continue;
    node.fn(*node.out);
  }
}

void Tape::clear() {
  for (auto& node : nodes_) {
    node.out->tape = nullptr;
    node.out->requires_grad = false;
    node.out->grad.clear();
  }
  nodes_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  if (loss.impl()->tape == nullptr || loss.impl()->tape != g_active_tape) {
    throw std::logic_error("loss is not recorded on the active tape");
  }
  g_active_tape->backward(loss);
}

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x + y; }, [](Real g, Real, Real, Real) { return g; },
      [](Real g, Real, Real, Real) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x - y; }, [](Real g, Real, Real, Real) { return g; },
      [](Real g, Real, Real, Real) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x * y; }, [](Real g, Real, Real y, Real) { return g * y; },
      [](Real g, Real x, Real, Real) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return x / y; }, [](Real g, Real, Real y, Real) { return g / y; },
      [](Real g, Real, Real y, Real o) { return -g * o / y; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](Real x, Real y) { return std::min(x, y); },
      [](Real g, Real x, Real y, Real) { return x <= y ? g : Real{0}; },
      [](Real g, Real x, Real y, Real) { return x <= y ? Real{0} : g; });
}

Tensor exp(const Tensor& a) {
  return unary_op(a, [](Real x) { return std::exp(x); }, [](Real g, Real, Real o) { return g * o; });
}

Tensor log(const Tensor& a) {
  check_nonnegative(a, "log");
  return unary_op(a, [](Real x) { return std::log(x); }, [](Real g, Real x, Real) { return g / x; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(a, [](Real x) { return std::tanh(x); }, [](Real g, Real, Real o) { return g * (1 - o * o); });
}

Tensor square(const Tensor& a) {
  return unary_op(a, [](Real x) { return x * x; }, [](Real g, Real x, Real) { return 2 * x * g; });
}

Tensor sqrt(const Tensor& a) {
  check_nonnegative(a, "sqrt");
  return unary_op(a, [](Real x) { return std::sqrt(x); }, [](Real g, Real, Real o) { return g / (2 * o); });
}

Tensor neg(const Tensor& a) {
  return unary_op(a, [](Real x) { return -x; }, [](Real g, Real, Real) { return -g; });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a, [](Real x) { return std::max(x, Real{0}) + std::log1p(std::exp(-std::abs(x))); },
      [](Real g, Real x, Real) {
        // Logistic sigmoid, written so neither branch overflows.
        const Real e = std::exp(-std::abs(x));
        return g * (x >= 0 ? 1 / (1 + e) : e / (1 + e));
      });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  const Real l = static_cast<Real>(lo);
  const Real h = static_cast<Real>(hi);
  return unary_op(
      a, [l, h](Real x) { return std::clamp(x, l, h); },
      [l, h](Real g, Real x, Real) { return (x >= l && x <= h) ? g : Real{0}; });
}

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor* b) {
  auto need_b = [&]() -> const Tensor& {
    if (b == nullptr) throw std::invalid_argument("binary elementwise op needs a second operand");
    return *b;
  };
  switch (kind) {
    case Elementwise::Add: return add(a, need_b());
    case Elementwise::Sub: return sub(a, need_b());
    case Elementwise::Mul: return mul(a, need_b());
    case Elementwise::Div: return div(a, need_b());
    case Elementwise::Exp: return exp(a);
    case Elementwise::Log: return log(a);
    case Elementwise::Tanh: return tanh(a);
    case Elementwise::Square: return square(a);
    case Elementwise::Sqrt: return sqrt(a);
    case Elementwise::Neg: return neg(a);
    case Elementwise::Softplus: return softplus(a);
  }
  throw std::invalid_argument("unknown elementwise op");
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& a) { return neg(a); }

Tensor operator+(const Tensor& a, double s) {
  const Real c = static_cast<Real>(s);
  return unary_op(a, [c](Real x) { return x + c; }, [](Real g, Real, Real) { return g; });
}
Tensor operator+(double s, const Tensor& a) { return a + s; }
Tensor operator-(const Tensor& a, double s) { return a + (-s); }
Tensor operator-(double s, const Tensor& a) {
  const Real c = static_cast<Real>(s);
  return unary_op(a, [c](Real x) { return c - x; }, [](Real g, Real, Real) { return -g; });
}
Tensor operator*(const Tensor& a, double s) {
  const Real c = static_cast<Real>(s);
  return unary_op(a, [c](Real x) { return x * c; }, [c](Real g, Real, Real) { return g * c; });
}
Tensor operator*(double s, const Tensor& a) { return a * s; }
Tensor operator/(const Tensor& a, double s) {
  const Real c = static_cast<Real>(s);
  return unary_op(a, [c](Real x) { return x / c; }, [c](Real g, Real, Real) { return g / c; });
}

// ---------------------------------------------------------------- matmul

namespace {
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.shape()[0]);
  const auto k = static_cast<Eigen::Index>(a.shape()[1]);
  const auto n = static_cast<Eigen::Index>(b.shape()[1]);
  std::vector<Real> out(static_cast<std::size_t>(m * n));
  Map(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  const bool record = needs_record({&a, &b});
  auto impl = make_impl({a.shape()[0], b.shape()[1]}, std::move(out));
  ImplPtr pa = a.impl();
  ImplPtr pb = b.impl();
  return finish(impl, record, [pa, pb, m, k, n](const TensorImpl& o) {
    MapC g(o.grad.data(), m, n);
    if (pa->requires_grad) {
      pa->ensure_grad();
      Map(pa->grad.data(), m, k).noalias() += g * MapC(pb->data.data(), k, n).transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      Map(pb->grad.data(), k, n).noalias() += MapC(pa->data.data(), m, k).transpose() * g;
    }
  });
}

// ---------------------------------------------------------------- reductions

Tensor reduce(Reduction kind, const Tensor& a, std::span<const int> axes) {
  const std::size_t nd = a.dim();
  std::vector<bool> reduced(nd, false);
  for (int ax : axes) {
    const int norm = ax < 0 ? ax + static_cast<int>(nd) : ax;
    if (norm < 0 || norm >= static_cast<int>(nd)) {
      throw ShapeError("invalid axis " + std::to_string(ax) + " for shape " + shape_str(a.shape()));
    }
    reduced[static_cast<std::size_t>(norm)] = true;
  }
  if (axes.empty()) {
    // Identity; still recorded so gradients flow through a distinct node.
    return unary_op(a, [](Real x) { return x; }, [](Real g, Real, Real) { return g; });
  }
  Shape out_shape;
  Shape kept_shape(nd);  // same rank as input, reduced axes set to 1
  std::size_t count = 1;
  for (std::size_t d = 0; d < nd; ++d) {
    if (reduced[d]) {
      kept_shape[d] = 1;
      count *= a.shape()[d];
    } else {
      kept_shape[d] = a.shape()[d];
      out_shape.push_back(a.shape()[d]);
    }
  }
  const Real scale = kind == Reduction::Mean ? Real{1} / static_cast<Real>(count) : Real{1};
  std::vector<Real> out(shape_numel(kept_shape), Real{0});
  const auto& da = a.impl()->data;
  // Iterate over the input, mapping each element onto its kept-shape slot.
  for_each_broadcast(a.shape(), a.shape(), kept_shape,
                     [&](std::size_t i, std::size_t, std::size_t io) { out[io] += da[i]; });
  for (Real& v : out) v *= scale;
  const bool record = needs_record({&a});
  auto impl = make_impl(out_shape, std::move(out));
  ImplPtr pa = a.impl();
  return finish(impl, record, [pa, kept_shape, scale](const TensorImpl& o) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for_each_broadcast(pa->shape, pa->shape, kept_shape,
                       [&](std::size_t i, std::size_t, std::size_t io) { pa->grad[i] += o.grad[io] * scale; });
  });
}

Tensor sum(const Tensor& a, std::initializer_list<int> axes) {
  return reduce(Reduction::Sum, a, std::span<const int>(axes.begin(), axes.size()));
}

Tensor mean(const Tensor& a, std::initializer_list<int> axes) {
  return reduce(Reduction::Mean, a, std::span<const int>(axes.begin(), axes.size()));
}

Tensor sum(const Tensor& a) {
  if (a.dim() == 0) return reduce(Reduction::Sum, a, {});
  std::vector<int> all(a.dim());
  std::iota(all.begin(), all.end(), 0);
  return reduce(Reduction::Sum, a, all);
}

Tensor mean(const Tensor& a) {
  if (a.dim() == 0) return reduce(Reduction::Mean, a, {});
  std::vector<int> all(a.dim());
  std::iota(all.begin(), all.end(), 0);
  return reduce(Reduction::Mean, a, all);
}

// ---------------------------------------------------------------- structure

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  const bool record = needs_record({&a});
  auto impl = make_impl(std::move(shape), a.impl()->data);
  ImplPtr pa = a.impl();
  return finish(impl, record, [pa](const TensorImpl& o) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const std::size_t rows = parts[0].dim() == 2 ? parts[0].shape()[0] : 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets;
  bool record = false;
  for (const Tensor& p : parts) {
    if (p.dim() != 2 || p.shape()[0] != rows) {
      throw ShapeError("concat_cols row mismatch: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    offsets.push_back(cols);
    cols += p.shape()[1];
    record = record || needs_record({&p});
  }
  std::vector<Real> out(rows * cols);
  std::vector<ImplPtr> inputs;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const auto& d = parts[j].impl()->data;
    const std::size_t w = parts[j].shape()[1];
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>(r * cols + offsets[j]));
    }
    inputs.push_back(parts[j].impl());
  }
  auto impl = make_impl({rows, cols}, std::move(out));
  return finish(impl, record, [inputs, offsets, rows, cols](const TensorImpl& o) {
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      const auto& in = inputs[j];
      if (!in->requires_grad) continue;
      in->ensure_grad();
      const std::size_t w = in->shape[1];
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < w; ++c) in->grad[r * w + c] += o.grad[r * cols + offsets[j] + c];
      }
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const int> rows) {
  if (table.dim() != 2) throw ShapeError("gather_rows needs a 2-D table, got " + shape_str(table.shape()));
  const std::size_t n = table.shape()[0];
  const std::size_t w = table.shape()[1];
  std::vector<int> idx(rows.begin(), rows.end());
  std::vector<Real> out(idx.size() * w);
  const auto& d = table.impl()->data;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= n) {
      throw ShapeError("gather_rows index " + std::to_string(idx[r]) + " outside table of " + std::to_string(n) +
                       " rows");
    }
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(idx[r]) * w), w,
                out.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  const bool record = needs_record({&table});
  auto impl = make_impl({idx.size(), w}, std::move(out));
  ImplPtr pt = table.impl();
  return finish(impl, record, [pt, idx, w](const TensorImpl& o) {
    if (!pt->requires_grad) return;
    pt->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < w; ++c) pt->grad[static_cast<std::size_t>(idx[r]) * w + c] += o.grad[r * w + c];
    }
  });
}

// ---------------------------------------------------------------- checking

namespace {

double rel_err(double autodiff, double numeric) {
  return std::abs(autodiff - numeric) / std::max(1.0, std::abs(numeric));
}

double nan_aware_max(double acc, double v) {
  if (std::isnan(v) || std::isnan(acc)) return std::numeric_limits<double>::quiet_NaN();
  return std::max(acc, v);
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  std::vector<Tensor> params{Tensor::parameter(x.shape(), std::vector<Real>(x.data().begin(), x.data().end()))};
  return grad_check_params([&]() { return f(params[0]); }, params, h);
}

double grad_check_params(const std::function<Tensor()>& f, std::vector<Tensor>& params, double h) {
  for (Tensor& p : params) p.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor y = f();
    backward(y);
  }
  double worst = 0.0;
  NoGradScope no_grad;
  for (Tensor& p : params) {
    const std::vector<Real> g = p.grad();
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real saved = values[i];
      values[i] = static_cast<Real>(saved + h);
      const double up = f().item();
      values[i] = static_cast<Real>(saved - h);
      const double down = f().item();
      values[i] = saved;
      worst = nan_aware_max(worst, rel_err(g[i], (up - down) / (2 * h)));
    }
    p.zero_grad();
  }
  return worst;
}

}  // namespace rocmlab
