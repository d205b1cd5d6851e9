// SPDX-License-Identifier: Apache-2.0
#include "fnndg/tensor.hpp"

#include <utility>

#include "fnndg/errors.hpp"

namespace fnndg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows(rows), cols(cols), data(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows(rows), cols(cols), data(std::move(values)) {
  if (data.size() != rows * cols) {
    throw ShapeError("matrix " + shape_string() + " given " + std::to_string(data.size()) +
                     " values");
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.size() == 0 ? 0 : rows.begin()->size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw ShapeError("ragged row list");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Tensor::Tensor() : value_(std::make_shared<const Matrix>()) {}

Tensor Tensor::constant(Matrix value) {
  Tensor t;
  t.value_ = std::make_shared<const Matrix>(std::move(value));
  return t;
}

Tensor Tensor::parameter(Matrix value) {
  Tensor t = constant(std::move(value));
  t.requires_grad_ = true;
  return t;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ShapeError("item() on non-scalar tensor " + value_->shape_string());
  }
  return value_->data[0];
}

std::optional<std::size_t> Tensor::node_id() const {
  if (tape_ == nullptr) return std::nullopt;
  return node_;
}

bool Tape::owns(const Tensor& t) const {
  return t.tape_ == this && t.node_ < nodes_.size();
}

Tensor Tape::watch(const Tensor& leaf) {
  Tensor out;
  out.value_ = leaf.value_;
  out.tape_ = this;
  out.node_ = nodes_.size();
  out.requires_grad_ = true;
  nodes_.push_back(Node{leaf.rows(), leaf.cols(), {}, {}});
  return out;
}

Tensor Tape::record(Matrix value, std::span<const Tensor> inputs, BackwardRule rule) {
  std::vector<std::size_t> ids;
  ids.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    if (in.tape_ == nullptr) {
      ids.push_back(Tensor::kNoNode);
    } else if (!owns(in)) {
      throw ContractError("tensor belongs to a different or cleared tape");
    } else {
      ids.push_back(in.node_);
    }
  }
  Tensor out;
  out.value_ = std::make_shared<const Matrix>(std::move(value));
  out.tape_ = this;
  out.node_ = nodes_.size();
  out.requires_grad_ = true;
  nodes_.push_back(Node{out.rows(), out.cols(), std::move(ids), std::move(rule)});
  return out;
}

Gradients Tape::backward(const Tensor& root) const {
  if (root.rows() != 1 || root.cols() != 1) {
    throw ContractError("backward root must be 1x1, got " + root.value().shape_string());
  }
  Gradients grads;
  grads.tape_ = this;
  grads.slots_.reserve(nodes_.size());
  for (const Node& n : nodes_) grads.slots_.emplace_back(n.rows, n.cols);

  // A root with no node depends on nothing: every gradient stays zero.
  if (root.tape_ == nullptr) return grads;
  if (!owns(root)) throw ContractError("backward root is not on this tape");

  std::vector<bool> reached(nodes_.size(), false);
  grads.slots_[root.node_].data[0] = 1.0;
  reached[root.node_] = true;

  std::vector<Matrix*> input_slots;
  for (std::size_t i = root.node_ + 1; i-- > 0;) {
    if (!reached[i]) continue;
    const Node& node = nodes_[i];
    if (!node.rule) continue;  // leaf
    input_slots.assign(node.inputs.size(), nullptr);
    bool any = false;
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t id = node.inputs[k];
      if (id == Tensor::kNoNode) continue;
      input_slots[k] = &grads.slots_[id];
      reached[id] = true;
      any = true;
    }
    if (any) node.rule(grads.slots_[i], input_slots);
  }
  return grads;
}

Matrix Gradients::of(const Tensor& t) const {
  if (t.tape() == tape_ && t.node_id() && *t.node_id() < slots_.size()) {
    return slots_[*t.node_id()];
  }
  return Matrix(t.rows(), t.cols());
}

Tensor make_result(Matrix value, std::initializer_list<Tensor> inputs, BackwardRule rule) {
  Tape* tape = nullptr;
  for (const Tensor& in : inputs) {
    if (in.tape() == nullptr) continue;
    if (tape != nullptr && in.tape() != tape) {
      throw ContractError("operation mixes tensors from different tapes");
    }
    tape = in.tape();
  }
  if (tape == nullptr) return Tensor::constant(std::move(value));
  return tape->record(std::move(value), std::span<const Tensor>(inputs.begin(), inputs.size()),
                      std::move(rule));
}

}  // namespace fnndg
