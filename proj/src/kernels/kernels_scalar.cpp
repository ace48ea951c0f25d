#include "vln/kernels.hpp"

namespace vln::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, const double* x, double* y, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * cols, x, cols);
}

void gemv_t_acc_scalar(const double* a, const double* x, double* y, std::size_t rows,
                       std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0) axpy_scalar(x[r], a + r * cols, y, cols);
  }
}

void ger_acc_scalar(const double* x, const double* y, double* a, std::size_t rows,
                    std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0) axpy_scalar(x[r], y, a + r * cols, cols);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::Scalar, dot_scalar, axpy_scalar, gemv_scalar,
                                 gemv_t_acc_scalar, ger_acc_scalar};
  return table;
}

}  // namespace vln::kernels
