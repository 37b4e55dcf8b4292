#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops shared by the embedding store and the classifier.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The two are bit-identical by construction: reduction kernels use a
// fixed 8-lane blocked accumulation with a fixed combining tree, elementwise
// kernels perform the same IEEE operations per element, and the build disables
// FP contraction. The active variant is chosen once at startup from CPU
// features; FAIRTEXT_SIMD=scalar|avx2 in the environment overrides it.

namespace fairtext::simd {

enum class IsaLevel { scalar, avx2 };

struct Kernels {
    // Blocked dot products. Accumulate in double over 8 lanes
    // (lane l sums elements with index % 8 == l over the blocked prefix),
    // combine as ((l0+l4)+(l2+l6)) + ((l1+l5)+(l3+l7)), then fold the
    // remaining tail elements sequentially.
    double (*dot_f32)(const float* a, const float* b, std::size_t n);
    double (*dot_f32_f64)(const float* a, const double* b, std::size_t n);
    double (*dot_f64)(const double* a, const double* b, std::size_t n);

    // acc[i] += x[i]
    void (*acc_f32)(double* acc, const float* x, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy_f64)(double* y, double a, const double* x, std::size_t n);
    // Adam step over one parameter block:
    //   m[i] = beta1*m[i] + (1-beta1)*g[i]
    //   v[i] = beta2*v[i] + (1-beta2)*(g[i]*g[i])
    //   w[i] = w[i] - (lr*(m[i]*bc1)) / (sqrt(v[i]*bc2) + eps)
    // with bc1, bc2 the bias-correction reciprocals for the current step.
    void (*adam_step_f64)(double* w, double* m, double* v, const double* g,
                          std::size_t n, double beta1, double beta2, double lr,
                          double bc1, double bc2, double eps);
};

// Kernel table for the level active in this process.
const Kernels& kernels();

// Specific tables, for equivalence tests.
const Kernels& scalar_kernels();
const Kernels& avx2_kernels();  // valid only if avx2_available()

IsaLevel active_level();
bool avx2_available();
const char* level_name(IsaLevel level);

}  // namespace fairtext::simd
