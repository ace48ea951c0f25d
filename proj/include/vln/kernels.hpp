#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense double-precision inner loops used by the autodiff core. Every routine
// has a portable scalar reference implementation; an AVX2/FMA variant is
// selected at runtime when the CPU supports it. Setting VLN_SIMD=scalar in the
// environment forces the reference path.
namespace vln::kernels {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x, A row-major rows x cols
  void (*gemv)(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
  // y += A^T x, A row-major rows x cols, x has rows entries, y has cols entries
  void (*gemv_t_acc)(const double* a, const double* x, double* y, std::size_t rows,
                     std::size_t cols);
  // A += x y^T, A row-major rows x cols
  void (*ger_acc)(const double* x, const double* y, double* a, std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_table();
// Null when the variant was not compiled in.
const KernelTable* avx2_table();

// Table chosen for this process (resolved once, on first use).
const KernelTable& active();
bool cpu_has_avx2();
std::string_view backend_name(Backend b);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace vln::kernels
