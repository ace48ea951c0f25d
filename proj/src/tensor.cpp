#include "vln/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "vln/errors.hpp"
#include "vln/rng.hpp"

namespace vln {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape s, std::vector<double> d, bool track)
    : shape(std::move(s)), data(std::move(d)), requires_grad(track) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (std::size_t dim : shape) {
    if (dim == 0) throw DimensionError("zero-sized dimension in shape " + shape_str(shape));
  }
  if (numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::zeros(Shape s, bool track) {
  const std::size_t n = numel(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0), track);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

std::span<double> Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

void Tensor::zero_grad() {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

std::string_view partition_name(Partition p) {
  switch (p) {
    case Partition::Embedding:
      return "embedding";
    case Partition::TextEncoder:
      return "text_encoder";
    case Partition::Decoder:
      return "decoder";
    case Partition::LmHead:
      return "lm_head";
  }
  return "unknown";
}

void xavier_fill(Tensor& t, std::uint64_t seed, std::size_t fan_in, std::size_t fan_out) {
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data) v = uniform(rng, -bound, bound);
}

}  // namespace vln
