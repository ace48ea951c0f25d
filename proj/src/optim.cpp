#include "vln/optim.hpp"

#include <algorithm>
#include <cmath>

#include "vln/errors.hpp"

namespace vln {

Adamax::Adamax(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adamax::step(std::span<Parameter* const> params, const LearningRate& lr) {
  for (Parameter* p : params) {
    Tensor& w = p->value;
    if (w.has_grad() && w.grad.size() != w.data.size()) {
      throw DimensionError("gradient of " + p->name + " has " + std::to_string(w.grad.size()) +
                           " values for shape " + shape_str(w.shape));
    }
  }
  for (Parameter* p : params) {
    Tensor& w = p->value;
    if (!w.requires_grad) {
      w.zero_grad();
      continue;
    }
    Slot& s = slots_[p->name];
    if (s.m.empty()) {
      s.m.assign(w.size(), 0.0);
      s.u.assign(w.size(), 0.0);
    }
    s.t += 1;
    const double rate = lr(*p) / (1.0 - std::pow(beta1_, static_cast<double>(s.t)));
    const bool has = w.has_grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = has ? w.grad[i] : 0.0;
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g;
      s.u[i] = std::max(beta2_ * s.u[i], std::abs(g));
      w.data[i] -= rate * s.m[i] / (s.u[i] + eps_);
    }
    w.zero_grad();
  }
}

void Adamax::save(Checkpoint& ckpt) const {
  for (const auto& [name, s] : slots_) {
    ckpt.add("adamax.m/" + name, Tensor({s.m.size()}, s.m));
    ckpt.add("adamax.u/" + name, Tensor({s.u.size()}, s.u));
    ckpt.add("adamax.t/" + name, Tensor::scalar(static_cast<double>(s.t)));
  }
}

void Adamax::load(const Checkpoint& ckpt) {
  slots_.clear();
  const std::string prefix = "adamax.m/";
  for (const auto& rec : ckpt.records) {
    if (rec.name.rfind(prefix, 0) != 0) continue;
    const std::string name = rec.name.substr(prefix.size());
    Slot s;
    s.m = rec.tensor.data;
    s.u = ckpt.at("adamax.u/" + name).data;
    s.t = static_cast<std::uint64_t>(ckpt.at("adamax.t/" + name).data.at(0));
    if (s.u.size() != s.m.size()) throw IoError("optimizer state for " + name + " is inconsistent");
    slots_[name] = std::move(s);
  }
}

void optimize_step(std::span<Parameter* const> params, Adamax& state,
                   const Adamax::LearningRate& lr) {
  state.step(params, lr);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->value.grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->value.grad) g *= f;
    }
  }
  return norm;
}

}  // namespace vln
