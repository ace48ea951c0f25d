#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vln/checkpoint.hpp"
#include "vln/tensor.hpp"

namespace vln {

// Adamax (infinity-norm Adam). State is kept per parameter name, including the
// step count, so a parameter that starts training late gets a fresh bias
// correction.
class Adamax {
 public:
  explicit Adamax(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  using LearningRate = std::function<double(const Parameter&)>;

  // Updates every parameter with requires_grad set, using its accumulated
  // gradient (a missing gradient counts as zero), then zeroes all gradients.
  // DimensionError when a gradient's length differs from its parameter's.
  void step(std::span<Parameter* const> params, const LearningRate& lr);

  // Records "adamax.m/<name>", "adamax.u/<name>", "adamax.t/<name>".
  void save(Checkpoint& ckpt) const;
  void load(const Checkpoint& ckpt);

 private:
  struct Slot {
    std::vector<double> m;
    std::vector<double> u;
    std::uint64_t t = 0;
  };
  double beta1_;
  double beta2_;
  double eps_;
  std::map<std::string, Slot> slots_;
};

// Functional form used by the training loop.
void optimize_step(std::span<Parameter* const> params, Adamax& state, const Adamax::LearningRate& lr);

// Scales all gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

}  // namespace vln
