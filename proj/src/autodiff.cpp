#include "vln/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vln/errors.hpp"
#include "vln/kernels.hpp"

namespace vln {

std::string_view op_name(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::MatVec: return "matvec";
    case OpKind::MatVecT: return "matvec_t";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Neg: return "neg";
    case OpKind::Concat: return "concat";
    case OpKind::Mean: return "mean";
    case OpKind::Stack: return "stack";
    case OpKind::Slice: return "slice";
    case OpKind::Row: return "row";
    case OpKind::Softmax: return "softmax";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::Sum: return "sum";
    case OpKind::Dot: return "dot";
    case OpKind::Custom: return "custom";
  }
  return "unknown";
}

const Shape& Var::shape() const { return tape->node(id).shape; }
std::span<const double> Var::value() const { return tape->value_of(id); }
double Var::item() const {
  auto v = value();
  if (v.size() != 1) throw DimensionError("item() on non-scalar " + shape_str(shape()));
  return v[0];
}

std::span<const double> Tape::value_of(std::int32_t id) const {
  const Node& n = nodes_[id];
  if (n.param != nullptr) return n.param->data;
  return n.value;
}

Var Tape::push(Node node) { 
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor t) {
  Node n;
  n.shape = std::move(t.shape);
  n.value = std::move(t.data);
  return push(std::move(n));
}

Var Tape::constant(std::span<const double> values) {
  if (values.empty()) throw DimensionError("empty constant");
  Node n;
  n.shape = {values.size()};
  n.value.assign(values.begin(), values.end());
  return push(std::move(n));
}

Var Tape::param(Tensor& t) {
  Node n;
  n.shape = t.shape;
  n.param = &t;
  n.grad_sink = &t;
  n.needs_grad = t.requires_grad;
  return push(std::move(n));
}

Var Tape::view(const Tensor& t) {
  Node n;
  n.shape = t.shape;
  n.param = &t;
  return push(std::move(n));
}

std::span<const double> Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad_sink != nullptr) return n.grad_sink->grad;
  if (n.param != nullptr) return {};
  return n.grad;
}

std::span<double> Tape::grad_buffer(std::int32_t id) {
  Node& n = nodes_[id];
  if (n.grad_sink != nullptr) return n.grad_sink->ensure_grad();
  if (n.grad.empty()) n.grad.assign(numel(n.shape), 0.0);
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw UsageError("backward root belongs to another tape");
  if (numel(nodes_.at(root.id).shape) != 1) {
    throw UsageError("backward requires a scalar root, got " + shape_str(nodes_[root.id].shape));
  }
  for (Node& n : nodes_) n.grad.clear();
  visits_ = 0;
  if (!nodes_[root.id].needs_grad) return;
  grad_buffer(root.id)[0] += 1.0;
  for (std::int32_t k = root.id; k >= 0; --k) {
    ++visits_;
    const Node& n = nodes_[k];
    if (!n.needs_grad || n.op == OpKind::Leaf || n.grad.empty()) continue;
    propagate(k);
  }
}

namespace {

[[noreturn]] void mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                       shape_str(b));
}

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw UsageError("operands live on different tapes");
  return *a.tape;
}

Tape::Node make_node(OpKind op, std::initializer_list<Var> ins, Shape shape) {
  Tape::Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.inputs.reserve(ins.size());
  for (Var v : ins) {
    n.inputs.push_back(v.id);
    n.needs_grad = n.needs_grad || v.tape->node(v.id).needs_grad;
  }
  return n;
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.empty() || sb.size() > 2 || sa[1] != sb[0]) mismatch("matmul", sa, sb);
  const auto& K = kernels::active();
  const std::size_t m = sa[0], k = sa[1];
  if (sb.size() == 1) {
    Tape::Node n = make_node(OpKind::MatVec, {a, b}, {m});
    n.value.assign(m, 0.0);
    K.gemv(a.value().data(), b.value().data(), n.value.data(), m, k);
    return t.push(std::move(n));
  }
  const std::size_t cols = sb[1];
  Tape::Node n = make_node(OpKind::MatMul, {a, b}, {m, cols});
  n.value.assign(m * cols, 0.0);
  auto av = a.value();
  auto bv = b.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      K.axpy(av[i * k + p], bv.data() + p * cols, n.value.data() + i * cols, cols);
    }
  }
  return t.push(std::move(n));
}

Var matvec_t(Var a, Var x) {
  Tape& t = same_tape(a, x);
  const Shape& sa = a.shape();
  const Shape& sx = x.shape();
  if (sa.size() != 2 || sx.size() != 1 || sa[0] != sx[0]) mismatch("matvec_t", sa, sx);
  Tape::Node n = make_node(OpKind::MatVecT, {a, x}, {sa[1]});
  n.value.assign(sa[1], 0.0);
  kernels::active().gemv_t_acc(a.value().data(), x.value().data(), n.value.data(), sa[0], sa[1]);
  return t.push(std::move(n));
}

Var elementwise(Var a, Var b, BinaryKind kind) {
  Tape& t = same_tape(a, b);
  const auto av = a.value();
  const auto bv = b.value();
  const bool broadcast = kind == BinaryKind::Mul && (av.size() == 1 || bv.size() == 1) &&
                         av.size() != bv.size();
  if (!broadcast && a.shape() != b.shape()) {
    mismatch(kind == BinaryKind::Add ? "add" : kind == BinaryKind::Sub ? "sub" : "mul", a.shape(),
             b.shape());
  }
  const OpKind op = kind == BinaryKind::Add ? OpKind::Add
                    : kind == BinaryKind::Sub ? OpKind::Sub
                                              : OpKind::Mul;
  const Shape& out_shape = av.size() >= bv.size() ? a.shape() : b.shape();
  Tape::Node n = make_node(op, {a, b}, out_shape);
  const std::size_t len = std::max(av.size(), bv.size());
  n.value.resize(len);
  switch (kind) {
    case BinaryKind::Add:
      for (std::size_t i = 0; i < len; ++i) n.value[i] = av[i] + bv[i];
      break;
    case BinaryKind::Sub:
      for (std::size_t i = 0; i < len; ++i) n.value[i] = av[i] - bv[i];
      break;
    case BinaryKind::Mul:
      if (av.size() == 1 && broadcast) {
        for (std::size_t i = 0; i < len; ++i) n.value[i] = av[0] * bv[i];
      } else if (bv.size() == 1 && broadcast) {
        for (std::size_t i = 0; i < len; ++i) n.value[i] = av[i] * bv[0];
      } else {
        for (std::size_t i = 0; i < len; ++i) n.value[i] = av[i] * bv[i];
      }
      break;
  }
  return t.push(std::move(n));
}

Var add(Var a, Var b) { return elementwise(a, b, BinaryKind::Add); }
Var sub(Var a, Var b) { return elementwise(a, b, BinaryKind::Sub); }
Var mul(Var a, Var b) { return elementwise(a, b, BinaryKind::Mul); }

Var scale(Var a, double c) {
  Tape::Node n = make_node(OpKind::Scale, {a}, a.shape());
  n.scalar = c;
  auto av = a.value();
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = c * av[i];
  return a.tape->push(std::move(n));
}

Var unary(Var x, UnaryKind kind) {
  auto xv = x.value();
  OpKind op{};
  switch (kind) {
    case UnaryKind::Tanh: op = OpKind::Tanh; break;
    case UnaryKind::Sigmoid: op = OpKind::Sigmoid; break;
    case UnaryKind::Exp: op = OpKind::Exp; break;
    case UnaryKind::Log: op = OpKind::Log; break;
    case UnaryKind::Neg: op = OpKind::Neg; break;
  }
  Tape::Node n = make_node(op, {x}, x.shape());
  n.value.resize(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    switch (kind) {
      case UnaryKind::Tanh: n.value[i] = std::tanh(v); break;
      case UnaryKind::Sigmoid: n.value[i] = sigmoid_scalar(v); break;
      case UnaryKind::Exp: n.value[i] = std::exp(v); break;
      case UnaryKind::Log:
        if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
        n.value[i] = std::log(v);
        break;
      case UnaryKind::Neg: n.value[i] = -v; break;
    }
  }
  return x.tape->push(std::move(n));
}

Var tanh(Var x) { return unary(x, UnaryKind::Tanh); }
Var sigmoid(Var x) { return unary(x, UnaryKind::Sigmoid); }
Var exp(Var x) { return unary(x, UnaryKind::Exp); }
Var log(Var x) { return unary(x, UnaryKind::Log); }
Var neg(Var x) { return unary(x, UnaryKind::Neg); }

Var custom_unary(Var x, std::shared_ptr<const CustomUnary> fn) {
  Tape::Node n = make_node(OpKind::Custom, {x}, x.shape());
  auto xv = x.value();
  n.value.resize(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) n.value[i] = fn->forward(xv[i]);
  n.custom = std::move(fn);
  return x.tape->push(std::move(n));
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Tape& t = *parts[0].tape;
  const Shape& first = parts[0].shape();
  Tape::Node n;
  n.op = OpKind::Concat;
  n.aux0 = axis;
  if (axis == 0) {
    std::size_t rows = 0;
    for (const Var& p : parts) {
      const Shape& s = p.shape();
      if (p.tape != &t || s.size() != first.size() || !std::equal(s.begin() + 1, s.end(), first.begin() + 1)) {
        mismatch("concat", first, s);
      }
      rows += s[0];
    }
    n.shape = first;
    n.shape[0] = rows;
    for (const Var& p : parts) {
      auto v = p.value();
      n.value.insert(n.value.end(), v.begin(), v.end());
    }
  } else if (axis == 1) {
    std::size_t cols = 0;
    for (const Var& p : parts) {
      const Shape& s = p.shape();
      if (p.tape != &t || s.size() != 2 || first.size() != 2 || s[0] != first[0]) {
        mismatch("concat(axis=1)", first, s);
      }
      cols += s[1];
    }
    n.shape = {first[0], cols};
    n.value.resize(first[0] * cols);
    for (std::size_t r = 0; r < first[0]; ++r) {
      std::size_t off = r * cols;
      for (const Var& p : parts) {
        auto v = p.value();
        const std::size_t c = p.shape()[1];
        std::copy_n(v.begin() + r * c, c, n.value.begin() + off);
        off += c;
      }
    }
  } else {
    throw DimensionError("concat axis " + std::to_string(axis) + " unsupported");
  }
  for (const Var& p : parts) {
    n.inputs.push_back(p.id);
    n.needs_grad = n.needs_grad || t.node(p.id).needs_grad;
  }
  return t.push(std::move(n));
}

Var concat(Var a, Var b, std::size_t axis) {
  const Var parts[2] = {a, b};
  return concat(parts, axis);
}

Var mean(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("mean of zero tensors");
  Tape& t = *parts[0].tape;
  const Shape& first = parts[0].shape();
  Tape::Node n;
  n.op = OpKind::Mean;
  n.shape = first;
  auto x0 = parts[0].value();
  n.value.assign(x0.begin(), x0.end());
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (const Var& p : parts) {
    if (p.tape != &t || p.shape() != first) mismatch("mean", first, p.shape());
    n.inputs.push_back(p.id);
    n.needs_grad = n.needs_grad || t.node(p.id).needs_grad;
  }
  for (std::size_t k = 1; k < parts.size(); ++k) {
    auto xv = parts[k].value();
    for (std::size_t i = 0; i < xv.size(); ++i) n.value[i] += (xv[i] - x0[i]) * inv;
  }
  return t.push(std::move(n));
}

Var stack(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack of zero tensors");
  Tape& t = *rows[0].tape;
  const Shape& first = rows[0].shape();
  if (first.size() != 1) throw DimensionError("stack expects 1-D rows, got " + shape_str(first));
  Tape::Node n;
  n.op = OpKind::Stack;
  n.shape = {rows.size(), first[0]};
  n.value.reserve(rows.size() * first[0]);
  for (const Var& r : rows) {
    if (r.tape != &t || r.shape() != first) mismatch("stack", first, r.shape());
    auto v = r.value();
    n.value.insert(n.value.end(), v.begin(), v.end());
    n.inputs.push_back(r.id);
    n.needs_grad = n.needs_grad || t.node(r.id).needs_grad;
  }
  return t.push(std::move(n));
}

Var slice(Var x, std::size_t begin, std::size_t length) {
  const Shape& s = x.shape();
  if (s.size() != 1 || length == 0 || begin + length > s[0]) {
    throw DimensionError("slice [" + std::to_string(begin) + ", +" + std::to_string(length) +
                         ") out of range for " + shape_str(s));
  }
  Tape::Node n = make_node(OpKind::Slice, {x}, {length});
  n.aux0 = begin;
  auto v = x.value();
  n.value.assign(v.begin() + begin, v.begin() + begin + length);
  return x.tape->push(std::move(n));
}

Var row(Var a, std::size_t r) {
  const Shape& s = a.shape();
  if (s.size() != 2 || r >= s[0]) {
    throw DimensionError("row " + std::to_string(r) + " out of range for " + shape_str(s));
  }
  Tape::Node n = make_node(OpKind::Row, {a}, {s[1]});
  n.aux0 = r;
  auto v = a.value();
  n.value.assign(v.begin() + r * s[1], v.begin() + (r + 1) * s[1]);
  return a.tape->push(std::move(n));
}

std::vector<double> softmax_values(std::span<const double> x) {
  if (x.empty()) throw DimensionError("softmax of empty input");
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

Var softmax(Var x) {
  if (x.shape().size() != 1) throw DimensionError("softmax expects 1-D input, got " + shape_str(x.shape()));
  Tape::Node n = make_node(OpKind::Softmax, {x}, x.shape());
  n.value = softmax_values(x.value());
  return x.tape->push(std::move(n));
}

Var cross_entropy(Var logits, std::size_t target) {
  const Shape& s = logits.shape();
  if (s.size() != 1) throw DimensionError("cross_entropy expects 1-D logits, got " + shape_str(s));
  if (target >= s[0]) {
    throw UsageError("cross_entropy target " + std::to_string(target) + " out of range for " +
                     std::to_string(s[0]) + " classes");
  }
  Tape::Node n = make_node(OpKind::CrossEntropy, {logits}, {1});
  auto v = logits.value();
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  const double lse = mx + std::log(z);
  n.value = {lse - v[target]};
  n.saved.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) n.saved[i] = std::exp(v[i] - lse);
  n.aux0 = target;
  return logits.tape->push(std::move(n));
}

Var sum(Var x) {
  Tape::Node n = make_node(OpKind::Sum, {x}, {1});
  double s = 0.0;
  for (double v : x.value()) s += v;
  n.value = {s};
  return x.tape->push(std::move(n));
}

Var dot(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.shape().size() != 1 || a.shape() != b.shape()) mismatch("dot", a.shape(), b.shape());
  Tape::Node n = make_node(OpKind::Dot, {a, b}, {1});
  n.value = {kernels::dot(a.value(), b.value())};
  return t.push(std::move(n));
}

void Tape::propagate(std::int32_t id) {
  // Copy what we need: grad_buffer() may touch other nodes but never this one.
  const Node& n = nodes_[id];
  const std::span<const double> g = n.grad;
  const auto& K = kernels::active();
  auto wants = [&](std::size_t i) { return nodes_[n.inputs[i]].needs_grad; };
  auto in_val = [&](std::size_t i) { return value_of(n.inputs[i]); };

  switch (n.op) {
    case OpKind::Leaf:
      break;
    case OpKind::MatVec: {
      const Shape& sa = nodes_[n.inputs[0]].shape;
      const std::size_t m = sa[0], k = sa[1];
      if (wants(0)) K.ger_acc(g.data(), in_val(1).data(), grad_buffer(n.inputs[0]).data(), m, k);
      if (wants(1)) K.gemv_t_acc(in_val(0).data(), g.data(), grad_buffer(n.inputs[1]).data(), m, k);
      break;
    }
    case OpKind::MatVecT: {
      const Shape& sa = nodes_[n.inputs[0]].shape;
      const std::size_t m = sa[0], k = sa[1];
      if (wants(0)) K.ger_acc(in_val(1).data(), g.data(), grad_buffer(n.inputs[0]).data(), m, k);
      if (wants(1)) {
        auto gx = grad_buffer(n.inputs[1]);
        auto av = in_val(0);
        for (std::size_t r = 0; r < m; ++r) gx[r] += K.dot(av.data() + r * k, g.data(), k);
      }
      break;
    }
    case OpKind::MatMul: {
      const Shape& sa = nodes_[n.inputs[0]].shape;
      const std::size_t m = sa[0], k = sa[1], cols = n.shape[1];
      auto av = in_val(0);
      auto bv = in_val(1);
      if (wants(0)) {
        auto ga = grad_buffer(n.inputs[0]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p)
            ga[i * k + p] += K.dot(g.data() + i * cols, bv.data() + p * cols, cols);
      }
      if (wants(1)) {
        auto gb = grad_buffer(n.inputs[1]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p)
            K.axpy(av[i * k + p], g.data() + i * cols, gb.data() + p * cols, cols);
      }
      break;
    }
    case OpKind::Add:
    case OpKind::Sub: {
      if (wants(0)) {
        auto ga = grad_buffer(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto gb = grad_buffer(n.inputs[1]);
        if (n.op == OpKind::Add) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
      }
      break;
    }
    case OpKind::Mul: {
      auto av = in_val(0);
      auto bv = in_val(1);
      if (av.size() == bv.size()) {
        if (wants(0)) {
          auto ga = grad_buffer(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (wants(1)) {
          auto gb = grad_buffer(n.inputs[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
      } else {
        // scalar broadcast: s * v
        const bool a_scalar = av.size() == 1;
        const std::size_t si = a_scalar ? 0 : 1;
        const std::size_t vi = a_scalar ? 1 : 0;
        auto sv = in_val(si);
        auto vv = in_val(vi);
        if (wants(si)) grad_buffer(n.inputs[si])[0] += K.dot(g.data(), vv.data(), g.size());
        if (wants(vi)) K.axpy(sv[0], g.data(), grad_buffer(n.inputs[vi]).data(), g.size());
      }
      break;
    }
    case OpKind::Scale: {
      if (wants(0)) K.axpy(n.scalar, g.data(), grad_buffer(n.inputs[0]).data(), g.size());
      break;
    }
    case OpKind::Tanh: {
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case OpKind::Sigmoid: {
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    }
    case OpKind::Exp: {
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.value[i];
      break;
    }
    case OpKind::Log: {
      auto xv = in_val(0);
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
      break;
    }
    case OpKind::Neg: {
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
      break;
    }
    case OpKind::Custom: {
      auto xv = in_val(0);
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.custom->derivative(xv[i]);
      break;
    }
    case OpKind::Concat: {
      if (n.aux0 == 0) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const std::size_t len = numel(nodes_[n.inputs[p]].shape);
          if (wants(p)) {
            auto gp = grad_buffer(n.inputs[p]);
            for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
          }
          off += len;
        }
      } else {
        const std::size_t rows = n.shape[0], cols = n.shape[1];
        std::size_t col_off = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const std::size_t c = nodes_[n.inputs[p]].shape[1];
          if (wants(p)) {
            auto gp = grad_buffer(n.inputs[p]);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += g[r * cols + col_off + j];
          }
          col_off += c;
        }
      }
      break;
    }
    case OpKind::Mean: {
      const double inv = 1.0 / static_cast<double>(n.inputs.size());
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        if (wants(p)) K.axpy(inv, g.data(), grad_buffer(n.inputs[p]).data(), g.size());
      }
      break;
    }
    case OpKind::Stack: {
      const std::size_t cols = n.shape[1];
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        if (!wants(p)) continue;
        auto gp = grad_buffer(n.inputs[p]);
        for (std::size_t j = 0; j < cols; ++j) gp[j] += g[p * cols + j];
      }
      break;
    }
    case OpKind::Slice: {
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[n.aux0 + i] += g[i];
      break;
    }
    case OpKind::Row: {
      auto gx = grad_buffer(n.inputs[0]);
      const std::size_t cols = n.shape[0];
      for (std::size_t j = 0; j < cols; ++j) gx[n.aux0 * cols + j] += g[j];
      break;
    }
    case OpKind::Softmax: {
      const double gy = K.dot(g.data(), n.value.data(), g.size());
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.value[i] * (g[i] - gy);
      break;
    }
    case OpKind::CrossEntropy: {
      auto gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < n.saved.size(); ++i) {
        gx[i] += g[0] * (n.saved[i] - (i == n.aux0 ? 1.0 : 0.0));
      }
      break;
    }
    case OpKind::Sum: {
      auto gx = grad_buffer(n.inputs[0]);
      for (double& v : gx) v += g[0];
      break;
    }
    case OpKind::Dot: {
      auto av = in_val(0);
      auto bv = in_val(1);
      if (wants(0)) K.axpy(g[0], bv.data(), grad_buffer(n.inputs[0]).data(), bv.size());
      if (wants(1)) K.axpy(g[0], av.data(), grad_buffer(n.inputs[1]).data(), av.size());
      break;
    }
  }
}

}  // namespace vln
