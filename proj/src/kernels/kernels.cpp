#include <cstdlib>
#include <cstring>

#include "kernels_internal.hpp"

namespace icx::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * cols, x, cols);
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x,
                   double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = x[r];
    const double* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += xr * row[c];
  }
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

const KernelTable kScalar{Isa::scalar, dot_scalar, gemv_scalar, gemv_t_scalar, axpy_scalar};

const KernelTable& select() noexcept {
  const char* force = std::getenv("ICX_FORCE_SCALAR");
  if (force != nullptr && std::strcmp(force, "0") != 0 && *force != '\0') return kScalar;
  if (const KernelTable* t = table_for(Isa::avx2)) return *t;
  if (const KernelTable* t = table_for(Isa::neon)) return *t;
  return kScalar;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return &kScalar;
    case Isa::avx2:
#if defined(ICX_WITH_AVX2)
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return &detail::avx2_table();
      }
#endif
      return nullptr;
    case Isa::neon:
#if defined(ICX_WITH_NEON)
      return &detail::neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable& active() noexcept {
  static const KernelTable& table = select();
  return table;
}

}  // namespace icx::kernels
