#include "vln/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "vln/errors.hpp"
#include "vln/rng.hpp"

namespace vln {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

void record(GradCheckReport& r, std::size_t coord, double analytic, double numeric, double tol) {
  const double rel = relative_error(analytic, numeric);
  const double abs_err = std::abs(analytic - numeric);
  if (rel > r.max_rel_error) {
    r.max_rel_error = rel;
    r.worst_coord = coord;
  }
  r.max_abs_error = std::max(r.max_abs_error, abs_err);
  ++r.coords_checked;
  if (!(rel < tol)) r.passed = false;
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

GradCheckReport gradient_check(const ScalarFn& f, const Tensor& x, double step, double tol) {
  Tensor probe = x;
  probe.requires_grad = true;
  probe.grad.clear();

  auto eval = [&](Tensor& at) {
    Tape tape;
    Var out = f(tape, tape.param(at));
    return out.item();
  };

  {
    const double a = eval(probe);
    const double b = eval(probe);
    if (!same_bits(a, b)) throw OracleError("function is not deterministic");
  }

  Tape tape;
  Var out = f(tape, tape.param(probe));
  tape.backward(out);
  const std::vector<double> analytic = probe.grad.empty()
                                           ? std::vector<double>(probe.size(), 0.0)
                                           : probe.grad;

  GradCheckReport report;
  Tensor moved = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = moved.data[i];
    moved.data[i] = orig + step;
    const double up = eval(moved);
    moved.data[i] = orig - step;
    const double down = eval(moved);
    moved.data[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    record(report, i, analytic[i], numeric, tol);
  }
  return report;
}

GradCheckReport gradient_check_params(const LossFn& f, std::span<Tensor* const> params,
                                      std::size_t coords_per_tensor, std::uint64_t seed,
                                      double step, double tol) {
  auto eval = [&] {
    Tape tape;
    return f(tape).item();
  };
  {
    const double a = eval();
    const double b = eval();
    if (!same_bits(a, b)) throw OracleError("loss is not deterministic");
  }

  for (Tensor* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }

  Rng rng(seed);
  GradCheckReport report;
  std::size_t global = 0;
  for (Tensor* p : params) {
    std::vector<std::size_t> idx(p->size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t take = std::min(coords_per_tensor, idx.size());
    // partial Fisher-Yates
    for (std::size_t k = 0; k < take; ++k) {
      std::swap(idx[k], idx[k + uniform_index(rng, idx.size() - k)]);
    }
    const std::vector<double> analytic =
        p->grad.empty() ? std::vector<double>(p->size(), 0.0) : p->grad;
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t i = idx[k];
      const double orig = p->data[i];
      p->data[i] = orig + step;
      const double up = eval();
      p->data[i] = orig - step;
      const double down = eval();
      p->data[i] = orig;
      record(report, global + i, analytic[i], (up - down) / (2.0 * step), tol);
    }
    global += p->size();
  }
  return report;
}

}  // namespace vln
