#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "vln/tensor.hpp"

// Reverse-mode automatic differentiation over a dynamic tape. A Tape records
// every operation in insertion order; inputs of node k always have ids < k and
// backward() walks the nodes in strict reverse insertion order. A new tape is
// built for every forward pass, so rollouts of any length are expressible.
//
// Broadcasting is limited to scalar-times-tensor in mul(); every other shape
// mismatch raises DimensionError naming both shapes.
namespace vln {

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  MatVec,
  MatVecT,
  Add,
  Sub,
  Mul,
  Scale,
  Tanh,
  Sigmoid,
  Exp,
  Log,
  Neg,
  Concat,
  Mean,
  Stack,
  Slice,
  Row,
  Softmax,
  CrossEntropy,
  Sum,
  Dot,
  Custom,
};

std::string_view op_name(OpKind k);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  const Shape& shape() const;
  std::span<const double> value() const;
  std::size_t size() const { return value().size(); }
  double item() const;
};

// Elementwise derivative callback for custom_unary.
struct CustomUnary {
  std::function<double(double)> forward;
  std::function<double(double)> derivative;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A leaf that never receives gradient.
  Var constant(Tensor t);
  Var constant(std::span<const double> values);  // 1-D
  // A leaf bound to a caller-owned tensor. If the tensor requires grad,
  // backward() adds into tensor.grad. The tensor must outlive the tape and
  // must not be modified while the tape is alive.
  Var param(Tensor& t);
  // A read-only leaf over a caller-owned tensor; never receives gradient.
  Var view(const Tensor& t);

  // Populates gradients of every requires_grad tensor reachable from root.
  // Gradients add into the tensors' existing grad buffers; callers zero them
  // explicitly between steps.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.id).op; }
  std::span<const std::int32_t> inputs(Var v) const { return nodes_.at(v.id).inputs; }
  // Gradient of the last backward() root with respect to v. Empty when v was
  // not reached.
  std::span<const double> grad(Var v) const;
  std::size_t last_backward_visits() const { return visits_; }

  // Internal: used by the op functions below.
  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<std::int32_t> inputs;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> saved;  // op-specific cache (probabilities, ...)
    const Tensor* param = nullptr;  // bound leaf
    Tensor* grad_sink = nullptr;    // same tensor when bound with param()
    bool needs_grad = false;
    std::size_t aux0 = 0;
    std::size_t aux1 = 0;
    double scalar = 0.0;
    std::shared_ptr<const CustomUnary> custom;
  };

  Var push(Node node);
  const Node& node(std::int32_t id) const { return nodes_[id]; }
  std::span<const double> value_of(std::int32_t id) const;

 private:
  std::span<double> grad_buffer(std::int32_t id);
  void propagate(std::int32_t id);

  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

enum class BinaryKind { Add, Mul, Sub };
enum class UnaryKind { Tanh, Sigmoid, Exp, Log, Neg };

// a[m x k] * b[k x n] -> [m x n]; a[m x k] * b[k] -> [m].
Var matmul(Var a, Var b);
// a[m x k]^T * x[m] -> [k].
Var matvec_t(Var a, Var x);

Var elementwise(Var a, Var b, BinaryKind kind);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Same shapes, or one operand of size 1 (scalar broadcast).
Var mul(Var a, Var b);
Var scale(Var a, double c);

Var unary(Var x, UnaryKind kind);
Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);  // DomainError on non-positive input
Var neg(Var x);
Var custom_unary(Var x, std::shared_ptr<const CustomUnary> fn);

// axis 0: trailing dims must agree; axis 1: rank-2 inputs with equal rows.
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var concat(Var a, Var b, std::size_t axis = 0);
// Arithmetic mean of equally shaped tensors, computed as x0 + sum((xi - x0) / M)
// so identical inputs return x0 bit-for-bit.
Var mean(std::span<const Var> parts);
// Equally sized 1-D tensors -> [count x n].
Var stack(std::span<const Var> rows);
Var slice(Var x, std::size_t begin, std::size_t length);  // 1-D
Var row(Var a, std::size_t r);                             // 2-D -> 1-D

Var softmax(Var x);  // 1-D, max-subtracted
// -log softmax(logits)[target], 1-D logits.
Var cross_entropy(Var logits, std::size_t target);
Var sum(Var x);
Var dot(Var a, Var b);  // 1-D

// Numerically stable softmax of a plain vector (no tape).
std::vector<double> softmax_values(std::span<const double> x);

}  // namespace vln
