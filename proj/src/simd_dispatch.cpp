#include "fairtext/simd.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "simd_internal.hpp"

namespace fairtext::simd {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

IsaLevel resolve_level() {
    const bool usable = detail::avx2_kernels_or_null() != nullptr && cpu_has_avx2();
    const char* env = std::getenv("FAIRTEXT_SIMD");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) {
            return IsaLevel::scalar;
        }
        if (std::strcmp(env, "avx2") == 0) {
            if (usable) {
                return IsaLevel::avx2;
            }
            std::fprintf(stderr,
                         "[fairtext] FAIRTEXT_SIMD=avx2 requested but AVX2 is "
                         "unavailable; using scalar kernels\n");
            return IsaLevel::scalar;
        }
        std::fprintf(stderr, "[fairtext] ignoring unknown FAIRTEXT_SIMD value '%s'\n",
                     env);
    }
    return usable ? IsaLevel::avx2 : IsaLevel::scalar;
}

}  // namespace

bool avx2_available() {
    static const bool avail = detail::avx2_kernels_or_null() != nullptr && cpu_has_avx2();
    return avail;
}

IsaLevel active_level() {
    static const IsaLevel level = resolve_level();
    return level;
}

const Kernels& avx2_kernels() {
    const Kernels* k = detail::avx2_kernels_or_null();
    return k != nullptr ? *k : scalar_kernels();
}

const Kernels& kernels() {
    return active_level() == IsaLevel::avx2 ? avx2_kernels() : scalar_kernels();
}

const char* level_name(IsaLevel level) {
    return level == IsaLevel::avx2 ? "avx2" : "scalar";
}

}  // namespace fairtext::simd
