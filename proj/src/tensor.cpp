#include "senc/tensor.hpp"

#include <sstream>

namespace senc::ad {

int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape_size(shape) != static_cast<int64_t>(values.size()))
    throw DimensionError("tensor: " + shape_str(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
  return make(std::move(shape), std::move(values), nullptr, -1);
}

Tensor Tensor::zeros(Shape shape) {
  std::vector<double> v(static_cast<size_t>(shape_size(shape)), 0.0);
  return make(std::move(shape), std::move(v), nullptr, -1);
}

Tensor Tensor::full(Shape shape, double x) {
  std::vector<double> v(static_cast<size_t>(shape_size(shape)), x);
  return make(std::move(shape), std::move(v), nullptr, -1);
}

Tensor Tensor::scalar(double v) { return make({1}, {v}, nullptr, -1); }

int Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is not rank-2, shape " + shape_str(shape_));
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is not rank-2, shape " + shape_str(shape_));
  return shape_[1];
}

double Tensor::at2(int r, int c) const {
  return (*data_)[static_cast<size_t>(r) * static_cast<size_t>(cols()) + static_cast<size_t>(c)];
}

const std::vector<double>& Tensor::values() const {
  if (!data_) throw ContractError("values(): tensor is empty");
  return *data_;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item(): tensor has " + std::to_string(size()) + " elements");
  return (*data_)[0];
}

Tensor Tensor::make(Shape shape, std::vector<double> values, Tape* tape, int node) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<const std::vector<double>>(std::move(values));
  t.tape_ = tape;
  t.node_ = node;
  return t;
}

Tensor Tape::leaf(Shape shape, std::vector<double> values) {
  if (shape_size(shape) != static_cast<int64_t>(values.size()))
    throw DimensionError("leaf: " + shape_str(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
  const int id = fresh_node(static_cast<int64_t>(values.size()));
  return Tensor::make(std::move(shape), std::move(values), this, id);
}

int Tape::fresh_node(int64_t size) {
  nodes_.push_back(NodeRec{size, nullptr});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_backward_fn(int node, std::function<void(Tape&)> fn) {
  nodes_[static_cast<size_t>(node)].fn = std::move(fn);
}

std::vector<double>& Tape::grad_buf(int node) {
  auto& g = grads_[static_cast<size_t>(node)];
  if (g.empty()) g.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].size), 0.0);
  return g;
}

const std::vector<double>* Tape::grad_if_any(int node) const {
  const auto& g = grads_[static_cast<size_t>(node)];
  return g.empty() ? nullptr : &g;
}

void Tape::backward(const Tensor& loss) {
  if (ran_backward_)
    throw ContractError("backward: tape already consumed; run a fresh forward pass");
  if (loss.tape() != this || !loss.on_tape())
    throw ContractError("backward: loss is not on this tape");
  if (loss.size() != 1)
    throw ContractError("backward: loss must be scalar, shape " + shape_str(loss.shape()));
  ran_backward_ = true;
  grads_.assign(nodes_.size(), {});
  grad_buf(loss.node())[0] = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const auto& rec = nodes_[static_cast<size_t>(i)];
    if (!rec.fn) continue;                       // leaf
    if (!grad_if_any(i)) continue;               // nothing flowed here
    rec.fn(*this);
  }
}

std::span<const double> Tape::grad(const Tensor& t) const {
  if (!ran_backward_) throw ContractError("grad: backward has not run");
  if (t.tape() != this || !t.on_tape()) throw ContractError("grad: tensor is not on this tape");
  const auto* g = grad_if_any(t.node());
  if (g) return {g->data(), g->size()};
  return {};
}

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->on_tape()) continue;
    if (tape && t->tape() != tape)
      throw ContractError("op: operands live on different tapes");
    tape = t->tape();
  }
  return tape;
}

}  // namespace senc::ad
