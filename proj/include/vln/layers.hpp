#pragma once

#include <cstddef>
#include <cstdint>

#include "vln/autodiff.hpp"

namespace vln {

struct LstmState {
  Var h;
  Var c;
};

// One LSTM cell step. W is [4H x (in + H)], b is [4H]; gate rows are ordered
// input, forget, candidate, output.
LstmState lstm_step(Var W, Var b, Var x, const LstmState& prev);
LstmState lstm_zero_state(Tape& tape, std::size_t hidden);

// Xavier-uniform weights; biases zero except the forget gate, which starts at 1.
void init_lstm(Tensor& W, Tensor& b, std::size_t in, std::size_t hidden, std::uint64_t seed);

}  // namespace vln
