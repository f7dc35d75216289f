#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense double-precision kernels behind the ToyLM forward/backward passes and
// the embedding similarity. A scalar reference implementation is always built;
// SIMD variants are compiled in separate translation units and selected at
// runtime from the host CPU's capabilities.
namespace icx::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

/// Function table for one instruction set. Matrices are row-major.
struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y = A x, A is rows x cols.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// y = A^T x, A is rows x cols, y has cols entries.
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

/// Table for `isa` if it is compiled in and the CPU supports it, else nullptr.
const KernelTable* table_for(Isa isa) noexcept;

/// The best available table. Set ICX_FORCE_SCALAR=1 in the environment to pin
/// the reference path.
const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y) {
  active().gemv(a.data(), rows, cols, x.data(), y.data());
}

inline void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<double> y) {
  active().gemv_t(a.data(), rows, cols, x.data(), y.data());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace icx::kernels
