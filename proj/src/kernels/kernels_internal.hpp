#pragma once

#include "icx/kernels.hpp"

namespace icx::kernels::detail {

#if defined(ICX_WITH_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(ICX_WITH_NEON)
const KernelTable& neon_table() noexcept;
#endif

}  // namespace icx::kernels::detail
