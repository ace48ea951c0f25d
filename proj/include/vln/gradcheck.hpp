#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vln/autodiff.hpp"

namespace vln {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_coord = 0;
  bool passed = true;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// coordinates whose true gradient is ~0 from turning round-off into huge
// relative errors.
inline constexpr double kRelErrorFloor = 1e-3;
double relative_error(double analytic, double numeric);

// Compares reverse-mode gradients of a scalar function of x against central
// finite differences, coordinate by coordinate. Throws OracleError if two
// forward evaluations at the same point disagree.
using ScalarFn = std::function<Var(Tape&, Var)>;
GradCheckReport gradient_check(const ScalarFn& f, const Tensor& x, double step = 1e-6,
                               double tol = 1e-4);

// Same check for a loss over caller-owned parameters. Up to `coords_per_tensor`
// coordinates of each tensor are sampled (all of them when the tensor is
// smaller). Tensors are perturbed in place and restored bit-for-bit.
using LossFn = std::function<Var(Tape&)>;
GradCheckReport gradient_check_params(const LossFn& f, std::span<Tensor* const> params,
                                      std::size_t coords_per_tensor, std::uint64_t seed,
                                      double step = 1e-6, double tol = 1e-4);

}  // namespace vln
