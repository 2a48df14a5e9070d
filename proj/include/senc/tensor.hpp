#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "senc/error.hpp"

namespace senc::ad {

using Shape = std::vector<int>;

int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// Dense f64 tensor, row-major. Values are immutable once constructed; ops
// produce fresh tensors. A tensor optionally references the tape node that
// produced it, which is how backward finds it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
  int rows() const;
  int cols() const;

  const std::vector<double>& values() const;
  double at(int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }
  double at2(int r, int c) const;
  double item() const;  // size-1 tensors only

  bool defined() const { return static_cast<bool>(data_); }
  bool on_tape() const { return node_ >= 0; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  // Used by the op implementations; not part of the public surface.
  static Tensor make(Shape shape, std::vector<double> values, Tape* tape, int node);

 private:
  std::shared_ptr<const std::vector<double>> data_;
  Shape shape_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Reverse-mode tape. Ops append records during the forward pass; backward
// walks them once in exact reverse order, so gradient accumulation has a
// fixed, reproducible reduction order. The tape is rebuilt per forward pass
// and is confined to a single thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A leaf participates in backward; its gradient is readable afterwards.
  Tensor leaf(Shape shape, std::vector<double> values);

  // loss must be a scalar living on this tape. Runs once per tape.
  void backward(const Tensor& loss);

  // Gradient of the loss w.r.t. t (zeros if nothing flowed into it).
  std::span<const double> grad(const Tensor& t) const;

  size_t node_count() const { return nodes_.size(); }
  bool backward_ran() const { return ran_backward_; }

  // --- recording interface used by ops.cpp ---
  int fresh_node(int64_t size);
  void set_backward_fn(int node, std::function<void(Tape&)> fn);
  std::vector<double>& grad_buf(int node);           // allocates zeros on first touch
  const std::vector<double>* grad_if_any(int node) const;

 private:
  struct NodeRec {
    int64_t size;
    std::function<void(Tape&)> fn;  // null for leaves
  };
  std::vector<NodeRec> nodes_;
  std::vector<std::vector<double>> grads_;
  bool ran_backward_ = false;
};

// The single tape the operands live on (nullptr if all are constants).
// Mixing tensors from two tapes is a contract violation.
Tape* common_tape(std::initializer_list<const Tensor*> ts);

}  // namespace senc::ad
