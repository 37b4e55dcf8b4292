#include "simd_internal.hpp"

#if defined(FAIRTEXT_BUILD_AVX2)

#include <immintrin.h>

#include <cmath>

namespace fairtext::simd {

namespace {

// mul + add is used instead of FMA so each lane performs the same two
// roundings as the scalar reference.

inline double reduce_tree(__m256d acc0, __m256d acc1) {
    __m256d sum = _mm256_add_pd(acc0, acc1);  // (l0+l4, l1+l5, l2+l6, l3+l7)
    __m128d low = _mm256_castpd256_pd128(sum);
    __m128d high = _mm256_extractf128_pd(sum, 1);
    __m128d pair = _mm_add_pd(low, high);  // ((l0+l4)+(l2+l6), (l1+l5)+(l3+l7))
    __m128d swapped = _mm_unpackhi_pd(pair, pair);
    return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

double dot_f32_avx2(const float* a, const float* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 af = _mm256_loadu_ps(a + i);
        __m256 bf = _mm256_loadu_ps(b + i);
        __m256d a_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(af));
        __m256d a_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(af, 1));
        __m256d b_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(bf));
        __m256d b_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(bf, 1));
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(a_lo, b_lo));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(a_hi, b_hi));
    }
    double r = reduce_tree(acc0, acc1);
    for (; i < n; ++i) {
        r += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return r;
}

double dot_f32_f64_avx2(const float* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 af = _mm256_loadu_ps(a + i);
        __m256d a_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(af));
        __m256d a_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(af, 1));
        __m256d b_lo = _mm256_loadu_pd(b + i);
        __m256d b_hi = _mm256_loadu_pd(b + i + 4);
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(a_lo, b_lo));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(a_hi, b_hi));
    }
    double r = reduce_tree(acc0, acc1);
    for (; i < n; ++i) {
        r += static_cast<double>(a[i]) * b[i];
    }
    return r;
}

double dot_f64_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d a_lo = _mm256_loadu_pd(a + i);
        __m256d a_hi = _mm256_loadu_pd(a + i + 4);
        __m256d b_lo = _mm256_loadu_pd(b + i);
        __m256d b_hi = _mm256_loadu_pd(b + i + 4);
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(a_lo, b_lo));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(a_hi, b_hi));
    }
    double r = reduce_tree(acc0, acc1);
    for (; i < n; ++i) {
        r += a[i] * b[i];
    }
    return r;
}

void acc_f32_avx2(double* acc, const float* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d xd = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
        __m256d a = _mm256_loadu_pd(acc + i);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(a, xd));
    }
    for (; i < n; ++i) {
        acc[i] += static_cast<double>(x[i]);
    }
}

void axpy_f64_avx2(double* y, double a, const double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, xv)));
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void adam_step_f64_avx2(double* w, double* m, double* v, const double* g,
                        std::size_t n, double beta1, double beta2, double lr,
                        double bc1, double bc2, double eps) {
    const double c1s = 1.0 - beta1;
    const double c2s = 1.0 - beta2;
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d c1 = _mm256_set1_pd(c1s);
    const __m256d c2 = _mm256_set1_pd(c2s);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d bc1v = _mm256_set1_pd(bc1);
    const __m256d bc2v = _mm256_set1_pd(bc2);
    const __m256d epsv = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        mv = _mm256_add_pd(_mm256_mul_pd(b1, mv), _mm256_mul_pd(c1, gv));
        vv = _mm256_add_pd(_mm256_mul_pd(b2, vv),
                           _mm256_mul_pd(c2, _mm256_mul_pd(gv, gv)));
        __m256d num = _mm256_mul_pd(lrv, _mm256_mul_pd(mv, bc1v));
        __m256d den = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, bc2v)), epsv);
        __m256d wv = _mm256_loadu_pd(w + i);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(wv, _mm256_div_pd(num, den)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
    }
    for (; i < n; ++i) {
        m[i] = (beta1 * m[i]) + (c1s * g[i]);
        v[i] = (beta2 * v[i]) + (c2s * (g[i] * g[i]));
        w[i] = w[i] - (lr * (m[i] * bc1)) / (std::sqrt(v[i] * bc2) + eps);
    }
}

}  // namespace

namespace detail {

const Kernels* avx2_kernels_or_null() {
    static const Kernels k = {
        dot_f32_avx2, dot_f32_f64_avx2, dot_f64_avx2,
        acc_f32_avx2, axpy_f64_avx2,    adam_step_f64_avx2,
    };
    return &k;
}

}  // namespace detail

}  // namespace fairtext::simd

#else

namespace fairtext::simd::detail {

const Kernels* avx2_kernels_or_null() { return nullptr; }

}  // namespace fairtext::simd::detail

#endif
