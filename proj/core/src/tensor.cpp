#include "sirenrope/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sirenrope/errors.hpp"

namespace sirenrope {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// Tensor

namespace {

void require_defined(const TensorStorage* s) {
  if (s == nullptr) throw std::logic_error("use of an undefined Tensor");
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  auto s = std::make_shared<TensorStorage>();
  s->shape = std::move(shape);
  s->data = std::move(data);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  return from_data(std::move(shape), std::move(data), true);
}

const Shape& Tensor::shape() const {
  require_defined(storage_.get());
  return storage_->shape;
}

std::size_t Tensor::numel() const { return data().size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.empty()) return 1;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw ShapeError("matrix view of rank-" + std::to_string(s.size()) + " tensor");
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.empty()) return 1;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw ShapeError("matrix view of rank-" + std::to_string(s.size()) + " tensor");
}

std::span<const double> Tensor::data() const {
  require_defined(storage_.get());
  return storage_->data;
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return data()[row * cols() + col];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_to_string(shape()));
  }
  return data()[0];
}

bool Tensor::requires_grad() const {
  require_defined(storage_.get());
  return storage_->requires_grad;
}

bool Tensor::has_grad() const {
  require_defined(storage_.get());
  return !storage_->grad.empty();
}

std::span<const double> Tensor::grad() const {
  require_defined(storage_.get());
  return storage_->grad;
}

std::span<double> Tensor::grad_buffer() const {
  require_defined(storage_.get());
  if (!storage_->requires_grad) {
    throw std::logic_error("gradient requested for a tensor that does not require grad");
  }
  if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), 0.0);
  return storage_->grad;
}

void Tensor::zero_grad() {
  require_defined(storage_.get());
  storage_->grad.clear();
}

std::span<double> Tensor::mutable_data() {
  require_defined(storage_.get());
  return storage_->data;
}

Tensor Tensor::detach() const {
  return from_data(shape(), std::vector<double>(data().begin(), data().end()), false);
}

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::record(Tensor output, BackwardFn fn) {
  entries_.push_back(Entry{std::move(output.storage_), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  if (entries_.empty()) {
    throw std::logic_error("backward() on an empty tape (already consumed or nothing recorded)");
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward() on a loss that does not depend on any parameter");
  }
  Tensor seed = loss;
  seed.grad_buffer()[0] += 1.0;
  for (std::size_t i = entries_.size(); i-- > 0;) {
    auto& entry = entries_[i];
    if (visit_hook_) visit_hook_(i);
    if (entry.output->grad.empty()) continue;  // not on a path to the loss
    entry.backward(entry.output->grad);
  }
  entries_.clear();
}

Tensor record_op(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                 BackwardFn backward) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data), false);
  Tape* tape = g_active_tape;
  if (tape == nullptr) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  out.storage_->requires_grad = true;
  tape->record(out, std::move(backward));
  return out;
}

Tensor record_op(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                 BackwardFn backward) {
  Tape* tape = g_active_tape;
  if (tape == nullptr) {
    return Tensor::from_data(std::move(shape), std::move(data), false);
  }
  return record_op(std::move(shape), std::move(data), std::vector<Tensor>(inputs),
                   std::move(backward));
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() > 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " +
                     shape_to_string(t.shape()));
  }
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  const auto x = a.data();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  std::vector<double> y_copy;
  if (active_tape() != nullptr && a.requires_grad()) y_copy = y;
  return record_op(a.shape(), std::move(y), {a},
                   [a, df, y = std::move(y_copy)](std::span<const double> g) mutable {
                     const auto x = a.data();
                     auto ga = a.grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
                   });
}

enum class Broadcast { same, lhs_scalar, rhs_scalar };

Broadcast binary_layout(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.numel() == 1) return Broadcast::rhs_scalar;
  if (a.numel() == 1) return Broadcast::lhs_scalar;
  throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                   shape_to_string(b.shape()) + " are not broadcastable");
}

// f(x, y) -> z, dfa(x, y) = dz/dx, dfb(x, y) = dz/dy
template <typename F, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA dfa, DB dfb) {
  const Broadcast layout = binary_layout(a, b, op);
  const Shape shape = layout == Broadcast::lhs_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  const auto x = a.data();
  const auto y = b.data();
  const std::size_t sa = layout == Broadcast::lhs_scalar ? 0 : 1;
  const std::size_t sb = layout == Broadcast::rhs_scalar ? 0 : 1;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = f(x[i * sa], y[i * sb]);
  return record_op(shape, std::move(z), {a, b},
                   [a, b, sa, sb, dfa, dfb](std::span<const double> g) mutable {
                     const auto x = a.data();
                     const auto y = b.data();
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         ga[i * sa] += g[i] * dfa(x[i * sa], y[i * sb]);
                     }
                     if (b.requires_grad()) {
                       auto gb = b.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gb[i * sb] += g[i] * dfb(x[i * sa], y[i * sb]);
                     }
                   });
}

double dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  std::vector<double> c(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      const double* bp = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return record_op({m, n}, std::move(c), {a, b}, [a, b, m, k, n](std::span<const double> g) mutable {
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    if (a.requires_grad()) {
      double* ga = a.grad_buffer().data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* gi = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          ga[i * k + p] += dot(gi, pb + p * n, n);
        }
      }
    }
    if (b.requires_grad()) {
      double* gb = b.grad_buffer().data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* gi = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa[i * k + p];
          double* gbp = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbp[j] += aip * gi[j];
        }
      }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: inner dimensions differ: " + shape_to_string(a.shape()) +
                     " x " + shape_to_string(b.shape()) + "^T");
  }
  std::vector<double> c(m * n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = dot(pa + i * k, pb + j * k, k);
    }
  }
  return record_op({m, n}, std::move(c), {a, b}, [a, b, m, k, n](std::span<const double> g) mutable {
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    if (a.requires_grad()) {
      double* ga = a.grad_buffer().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * pb[j * k + p];
        }
    }
    if (b.requires_grad()) {
      double* gb = b.grad_buffer().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += gij * pa[i * k + p];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
  return record_op({n, m}, std::move(y), {a}, [a, m, n](std::span<const double> g) mutable {
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
  return unary(
      a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor sin(const Tensor& a) {
  return unary(
      a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary(
      a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

namespace {

void require_row(const Tensor& a, const Tensor& row, const char* op) {
  require_matrix(a, op);
  if (row.numel() != a.cols() || (row.rank() == 2 && row.rows() != 1)) {
    throw ShapeError(std::string(op) + ": row operand " + shape_to_string(row.shape()) +
                     " does not match " + shape_to_string(a.shape()));
  }
}

void require_col(const Tensor& a, const Tensor& col, const char* op) {
  require_matrix(a, op);
  if (col.numel() != a.rows() || (col.rank() == 2 && col.cols() != 1)) {
    throw ShapeError(std::string(op) + ": column operand " + shape_to_string(col.shape()) +
                     " does not match " + shape_to_string(a.shape()));
  }
}

}  // namespace

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_row(a, row, "add_row");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  const auto r = row.data();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] + r[j];
  return record_op(a.shape(), std::move(y), {a, row},
                   [a, row, m, n](std::span<const double> g) mutable {
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     }
                     if (row.requires_grad()) {
                       auto gr = row.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
                     }
                   });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  require_row(a, row, "mul_row");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  const auto r = row.data();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] * r[j];
  return record_op(a.shape(), std::move(y), {a, row},
                   [a, row, m, n](std::span<const double> g) mutable {
                     const auto x = a.data();
                     const auto r = row.data();
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * r[j];
                     }
                     if (row.requires_grad()) {
                       auto gr = row.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j] * x[i * n + j];
                     }
                   });
}

Tensor sub_col(const Tensor& a, const Tensor& col) {
  require_col(a, col, "sub_col");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  const auto c = col.data();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] - c[i];
  return record_op(a.shape(), std::move(y), {a, col},
                   [a, col, m, n](std::span<const double> g) mutable {
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     }
                     if (col.requires_grad()) {
                       auto gc = col.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) gc[i] -= g[i * n + j];
                     }
                   });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  require_col(a, col, "mul_col");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  const auto c = col.data();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] * c[i];
  return record_op(a.shape(), std::move(y), {a, col},
                   [a, col, m, n](std::span<const double> g) mutable {
                     const auto x = a.data();
                     const auto c = col.data();
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * c[i];
                     }
                     if (col.requires_grad()) {
                       auto gc = col.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) gc[i] += g[i * n + j] * x[i * n + j];
                     }
                   });
}

Tensor div_col(const Tensor& a, const Tensor& col) {
  require_col(a, col, "div_col");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  const auto c = col.data();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] / c[i];
  return record_op(a.shape(), std::move(y), {a, col},
                   [a, col, m, n](std::span<const double> g) mutable {
                     const auto x = a.data();
                     const auto c = col.data();
                     if (a.requires_grad()) {
                       auto ga = a.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] / c[i];
                     }
                     if (col.requires_grad()) {
                       auto gc = col.grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           gc[i] -= g[i * n + j] * x[i * n + j] / (c[i] * c[i]);
                     }
                   });
}

Tensor sum(const Tensor& a) {
  const auto x = a.data();
  const double s = std::accumulate(x.begin(), x.end(), 0.0);
  return record_op({1}, {s}, {a}, [a](std::span<const double> g) mutable {
    auto ga = a.grad_buffer();
    for (auto& v : ga) v += g[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor row_sum(const Tensor& a) {
  require_matrix(a, "row_sum");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i] += x[i * n + j];
  return record_op({m, 1}, std::move(y), {a}, [a, m, n](std::span<const double> g) mutable {
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_cols");
  const std::size_t m = a.rows(), n = a.cols();
  if (begin > end || end > n) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for " + shape_to_string(a.shape()));
  }
  const std::size_t w = end - begin;
  const auto x = a.data();
  std::vector<double> y(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * n + begin), w,
                y.begin() + static_cast<std::ptrdiff_t>(i * w));
  return record_op({m, w}, std::move(y), {a}, [a, m, n, w, begin](std::span<const double> g) mutable {
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * n + begin + j] += g[i * w + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row count mismatch " + shape_to_string(p.shape()) + " vs " +
                       std::to_string(m));
    }
    n += p.cols();
  }
  std::vector<double> y(m * n);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    const auto x = p.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) y[i * n + offset + j] = x[i * w + j];
    offset += w;
  }
  return record_op({m, n}, std::move(y), parts, [parts, m, n](std::span<const double> g) mutable {
    std::size_t offset = 0;
    for (auto& p : parts) {
      const std::size_t w = p.cols();
      if (p.requires_grad()) {
        auto gp = p.grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * n + offset + j];
      }
      offset += w;
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_to_string(a.shape()) + " -> " + shape_to_string(shape));
  }
  const auto x = a.data();
  return record_op(std::move(shape), std::vector<double>(x.begin(), x.end()), {a},
                   [a](std::span<const double> g) mutable {
                     auto ga = a.grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                   });
}

Tensor masked_softmax_rows(const Tensor& logits, const Tensor& mask) {
  require_matrix(logits, "masked_softmax_rows");
  if (mask.shape() != logits.shape()) {
    throw ShapeError("masked_softmax_rows: mask " + shape_to_string(mask.shape()) +
                     " vs logits " + shape_to_string(logits.shape()));
  }
  const std::size_t m = logits.rows(), n = logits.cols();
  const auto x = logits.data();
  const auto w = mask.data();
  // Constant shift: the masked row max on kept entries, zero on dropped
  // entries (which are first multiplied out so they exp() to exactly 1 before
  // the mask removes them). Empty rows get a normalizer guard of 1.
  std::vector<double> shift(m * n, 0.0), guard(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (w[i * n + j] != 0.0) best = std::max(best, x[i * n + j]);
    if (std::isinf(best)) {
      guard[i] = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (w[i * n + j] != 0.0) shift[i * n + j] = best;
  }
  const Tensor shifted = sub(mul(logits, mask), Tensor::from_data(logits.shape(), std::move(shift)));
  const Tensor weights = mul(exp(shifted), mask);
  const Tensor normalizer = add(row_sum(weights), Tensor::from_data({m, 1}, std::move(guard)));
  return div_col(weights, normalizer);
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_row(x, gamma, "layer_norm_rows");
  require_row(x, beta, "layer_norm_rows");
  const std::size_t m = x.rows(), n = x.cols();
  const auto v = x.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  std::vector<double> xhat(m * n), inv_std(m), y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += v[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = v[i * n + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (v[i * n + j] - mu) * inv_std[i];
      y[i * n + j] = xhat[i * n + j] * gm[j] + bt[j];
    }
  }
  return record_op(
      x.shape(), std::move(y), {x, gamma, beta},
      [x, gamma, beta, m, n, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](std::span<const double> g) mutable {
        const auto gm = gamma.data();
        if (gamma.requires_grad()) {
          auto gg = gamma.grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
        }
        if (beta.requires_grad()) {
          auto gb = beta.grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
        if (x.requires_grad()) {
          auto gx = x.grad_buffer();
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gm[j];
              mean_d += d;
              mean_dx += d * xhat[i * n + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gm[j];
              gx[i * n + j] += inv_std[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
      });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("bce_with_logits: logits " + shape_to_string(logits.shape()) +
                     " vs targets " + shape_to_string(targets.shape()));
  }
  const auto z = logits.data();
  const auto t = targets.data();
  const std::size_t n = z.size();
  if (n == 0) throw ShapeError("bce_with_logits: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return record_op({1}, {total / static_cast<double>(n)}, {logits},
                   [logits, targets, n](std::span<const double> g) mutable {
                     const auto z = logits.data();
                     const auto t = targets.data();
                     auto gz = logits.grad_buffer();
                     const double s = g[0] / static_cast<double>(n);
                     for (std::size_t i = 0; i < n; ++i) {
                       const double p = z[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-z[i]))
                                                    : std::exp(z[i]) / (1.0 + std::exp(z[i]));
                       gz[i] += s * (p - t[i]);
                     }
                   });
}

}  // namespace sirenrope
