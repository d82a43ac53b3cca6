#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// Operations are recorded only while a Tape is installed on the calling
// thread (see TapeScope) and at least one input requires a gradient. Outside
// of a TapeScope every op is a plain forward computation and allocates no
// tape entries.
//
// Broadcasting is limited to three explicit forms:
//   * scalar broadcast in add/sub/mul/div (one operand has a single element),
//   * row broadcast (*_row: an [n] or 1xn operand against an m x n matrix),
//   * column broadcast (*_col: an m x 1 operand against an m x n matrix).
// Anything else is a ShapeError.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sirenrope {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is first accumulated
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Leaf tensor that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Matrix view: rank-1 tensors are treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient buffer, allocated as zeros on first use.
  std::span<double> grad_buffer() const;
  void zero_grad();

  /// In-place overwrite for optimizer steps and initialization. Never call
  /// this on a tensor that is still referenced by an un-run tape.
  std::span<double> mutable_data();

  /// Same values, no gradient tracking, fresh storage.
  Tensor detach() const;

  const TensorStorage* storage() const { return storage_.get(); }
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  explicit Tensor(std::shared_ptr<TensorStorage> storage) : storage_(std::move(storage)) {}
  std::shared_ptr<TensorStorage> storage_;

  friend class Tape;
  friend Tensor record_op(Shape, std::vector<double>, std::initializer_list<Tensor>,
                          std::function<void(std::span<const double>)>);
  friend Tensor record_op(Shape, std::vector<double>, const std::vector<Tensor>&,
                          std::function<void(std::span<const double>)>);
};

using BackwardFn = std::function<void(std::span<const double> out_grad)>;

/// Ordered record of differentiable operations for one forward pass.
///
/// backward() walks entries in exact reverse recording order and then
/// clears the tape; a second backward() on the same (now empty) tape throws.
/// Leaf gradients keep accumulating across tapes until zero_grad().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Tensor output, BackwardFn fn);
  void backward(const Tensor& loss);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

  /// Called with the entry index each time backward runs an entry.
  void set_visit_hook(std::function<void(std::size_t)> hook) { visit_hook_ = std::move(hook); }

 private:
  struct Entry {
    std::shared_ptr<TensorStorage> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::function<void(std::size_t)> visit_hook_;
};

/// Installs a tape as the active recorder for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Builds an op result and records `backward` on the active tape when any
/// input requires a gradient. Building block for ops defined outside this
/// file (e.g. the rotary rotation).
Tensor record_op(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                 BackwardFn backward);
Tensor record_op(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                 BackwardFn backward);

// Matrix products.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Element-wise, same shape or scalar broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

// Row / column broadcast.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul_row(const Tensor& a, const Tensor& row);
Tensor sub_col(const Tensor& a, const Tensor& col);
Tensor mul_col(const Tensor& a, const Tensor& col);
Tensor div_col(const Tensor& a, const Tensor& col);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// m x n -> m x 1
Tensor row_sum(const Tensor& a);

// Layout.
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& a, Shape shape);

/// Row-wise softmax restricted to entries where mask == 1, composed from
/// primitives. Each row has its (masked) maximum subtracted before exp; the
/// shift is a constant so it does not change gradients. Rows whose mask is
/// all zero produce all-zero probabilities.
Tensor masked_softmax_rows(const Tensor& logits, const Tensor& mask);

/// Per-row layer normalization with affine gamma/beta (both [n]).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);

/// Mean binary cross-entropy over all entries, computed from logits.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

}  // namespace sirenrope
