#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vln {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles with an optional gradient buffer of the
// same length. Learned parameters and constant inputs both live in Tensors;
// intermediate activations live on a Tape.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty when no gradient has been accumulated

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d, bool track = false);

  static Tensor zeros(Shape s, bool track = false);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool has_grad() const { return !grad.empty(); }
  std::span<double> ensure_grad();
  void zero_grad();
};

// Which slice of the agent a learned tensor belongs to: the word-embedding
// function, the instruction encoder, or the decoder with its heads. LmHead is
// the pretraining-only output layer.
enum class Partition : std::uint8_t { Embedding, TextEncoder, Decoder, LmHead };

std::string_view partition_name(Partition p);

struct Parameter {
  std::string name;
  Partition partition;
  Tensor value;
};

// Xavier-uniform fill using the given 64-bit seed.
void xavier_fill(Tensor& t, std::uint64_t seed, std::size_t fan_in, std::size_t fan_out);

}  // namespace vln
