#include "vln/layers.hpp"

#include "vln/errors.hpp"

namespace vln {

LstmState lstm_step(Var W, Var b, Var x, const LstmState& prev) {
  const std::size_t H = prev.h.size();
  Var pre = add(matmul(W, concat(x, prev.h)), b);
  if (pre.size() != 4 * H) {
    throw DimensionError("lstm gates " + shape_str(pre.shape()) + " for hidden size " +
                         std::to_string(H));
  }
  Var i = sigmoid(slice(pre, 0, H));
  Var f = sigmoid(slice(pre, H, H));
  Var g = tanh(slice(pre, 2 * H, H));
  Var o = sigmoid(slice(pre, 3 * H, H));
  Var c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

LstmState lstm_zero_state(Tape& tape, std::size_t hidden) {
  Tensor z = Tensor::zeros({hidden});
  return {tape.constant(z), tape.constant(z)};
}

void init_lstm(Tensor& W, Tensor& b, std::size_t in, std::size_t hidden, std::uint64_t seed) {
  W = Tensor::zeros({4 * hidden, in + hidden}, true);
  xavier_fill(W, seed, in + hidden, hidden);
  b = Tensor::zeros({4 * hidden}, true);
  for (std::size_t k = hidden; k < 2 * hidden; ++k) b[k] = 1.0;
}

}  // namespace vln
