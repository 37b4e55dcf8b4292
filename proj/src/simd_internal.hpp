#pragma once

#include "fairtext/simd.hpp"

namespace fairtext::simd::detail {

// Null when the build target has no AVX2 code path.
const Kernels* avx2_kernels_or_null();

}  // namespace fairtext::simd::detail
