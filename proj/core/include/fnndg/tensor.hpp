// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrices and a tape for reverse-mode differentiation.
//
// A Tensor is a cheap handle: an immutable shared value plus, when it was
// produced on a Tape, the index of the node that produced it. Operations whose
// inputs include at least one taped tensor record a node; everything else is
// evaluated eagerly and yields a constant. Parameters that have not been
// watched by a tape therefore act as plain values (useful for evaluation).
//
//   Tape tape;
//   Tensor w = tape.watch(Tensor::parameter(Matrix(2, 3, 0.5)));
//   Tensor y = sum(matmul(x, w));
//   Gradients g = tape.backward(y);
//   Matrix dw = g.of(w);
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fnndg {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;
};

class Tape;

class Tensor {
 public:
  /// Empty 0x0 constant; mostly useful as a placeholder in aggregates.
  Tensor();

  static Tensor constant(Matrix value);
  /// Leaf flagged as trainable. It records nothing until a Tape watches it.
  static Tensor parameter(Matrix value);

  std::size_t rows() const { return value_->rows; }
  std::size_t cols() const { return value_->cols; }
  const Matrix& value() const { return *value_; }
  double operator()(std::size_t r, std::size_t c) const { return (*value_)(r, c); }
  /// Value of a 1x1 tensor.
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  std::optional<std::size_t> node_id() const;
  Tape* tape() const { return tape_; }

  const std::shared_ptr<const Matrix>& shared_value() const { return value_; }

 private:
  friend class Tape;

  std::shared_ptr<const Matrix> value_;
  Tape* tape_ = nullptr;
  std::size_t node_ = kNoNode;
  bool requires_grad_ = false;

  static constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);
};

/// Local gradient rule of a recorded node. `input_grads[i]` is null when input i
/// needs no gradient; otherwise the rule accumulates (+=) into it.
using BackwardRule =
    std::function<void(const Matrix& output_grad, std::span<Matrix* const> input_grads)>;

class Gradients;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `leaf` as a differentiable input of this tape.
  Tensor watch(const Tensor& leaf);

  /// Appends a node computed from `inputs`. Inputs that are not on this tape
  /// are treated as constants.
  Tensor record(Matrix value, std::span<const Tensor> inputs, BackwardRule rule);

  /// Reverse accumulation from a 1x1 root seeded with 1. Nodes the root does
  /// not depend on keep zero gradient.
  Gradients backward(const Tensor& root) const;

  std::size_t size() const { return nodes_.size(); }
  /// Drops every node. Tensors recorded before the call must not be reused.
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::size_t rows;
    std::size_t cols;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
  };

  bool owns(const Tensor& t) const;

  std::vector<Node> nodes_;
};

class Gradients {
 public:
  /// Gradient of the root w.r.t. `t`; zeros when `t` is not on the tape.
  Matrix of(const Tensor& t) const;
  const Matrix& at(std::size_t node_id) const { return slots_.at(node_id); }
  std::size_t size() const { return slots_.size(); }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<Matrix> slots_;
};

/// Records a node on the tape shared by `inputs`, or returns a constant when
/// none of them is taped. Mixing tensors from two tapes is a ContractError.
Tensor make_result(Matrix value, std::initializer_list<Tensor> inputs, BackwardRule rule);

}  // namespace fnndg
