#include "fairtext/simd.hpp"

#include <cmath>

namespace fairtext::simd {

namespace {

// The 8-lane blocked form mirrors the AVX2 register layout exactly so both
// variants perform the same IEEE operations in the same order.

double dot_f32_scalar(const float* a, const float* b, std::size_t n) {
    double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int l = 0; l < 8; ++l) {
            lane[l] += static_cast<double>(a[i + l]) * static_cast<double>(b[i + l]);
        }
    }
    double r = ((lane[0] + lane[4]) + (lane[2] + lane[6])) +
               ((lane[1] + lane[5]) + (lane[3] + lane[7]));
    for (; i < n; ++i) {
        r += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return r;
}

double dot_f32_f64_scalar(const float* a, const double* b, std::size_t n) {
    double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int l = 0; l < 8; ++l) {
            lane[l] += static_cast<double>(a[i + l]) * b[i + l];
        }
    }
    double r = ((lane[0] + lane[4]) + (lane[2] + lane[6])) +
               ((lane[1] + lane[5]) + (lane[3] + lane[7]));
    for (; i < n; ++i) {
        r += static_cast<double>(a[i]) * b[i];
    }
    return r;
}

double dot_f64_scalar(const double* a, const double* b, std::size_t n) {
    double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int l = 0; l < 8; ++l) {
            lane[l] += a[i + l] * b[i + l];
        }
    }
    double r = ((lane[0] + lane[4]) + (lane[2] + lane[6])) +
               ((lane[1] + lane[5]) + (lane[3] + lane[7]));
    for (; i < n; ++i) {
        r += a[i] * b[i];
    }
    return r;
}

void acc_f32_scalar(double* acc, const float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        acc[i] += static_cast<double>(x[i]);
    }
}

void axpy_f64_scalar(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void adam_step_f64_scalar(double* w, double* m, double* v, const double* g,
                          std::size_t n, double beta1, double beta2, double lr,
                          double bc1, double bc2, double eps) {
    const double c1 = 1.0 - beta1;
    const double c2 = 1.0 - beta2;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = (beta1 * m[i]) + (c1 * g[i]);
        v[i] = (beta2 * v[i]) + (c2 * (g[i] * g[i]));
        w[i] = w[i] - (lr * (m[i] * bc1)) / (std::sqrt(v[i] * bc2) + eps);
    }
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k = {
        dot_f32_scalar, dot_f32_f64_scalar, dot_f64_scalar,
        acc_f32_scalar, axpy_f64_scalar,    adam_step_f64_scalar,
    };
    return k;
}

}  // namespace fairtext::simd
