#include "asts/kernels.hpp"

#include <immintrin.h>

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace asts::kernels {

namespace scalar {

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void xpay(const double* x, double a, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + a * y[i];
}

void scale_mul(const double* d, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = d[i] * x[i];
}

void spmv(const CsrView& A, const double* x, double* y) {
    for (std::ptrdiff_t r = 0; r < A.rows; ++r) {
        double s = 0.0;
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) s += A.val[k] * x[A.col[k]];
        y[r] = s;
    }
}

}  // namespace scalar

namespace avx2 {

namespace {

__attribute__((target("avx2,fma"))) inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

__attribute__((target("avx2,fma"))) double dot(const double* x, const double* y, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
    }
    for (; i + 4 <= n; i += 4) a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

__attribute__((target("avx2,fma"))) void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2,fma"))) void xpay(const double* x, double a, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = x[i] + a * y[i];
}

__attribute__((target("avx2,fma"))) void scale_mul(const double* d, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(d + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = d[i] * x[i];
}

__attribute__((target("avx2,fma"))) void spmv(const CsrView& A, const double* x, double* y) {
    for (std::ptrdiff_t r = 0; r < A.rows; ++r) {
        int k = A.row_ptr[r];
        const int end = A.row_ptr[r + 1];
        __m256d acc = _mm256_setzero_pd();
        for (; k + 4 <= end; k += 4) {
            __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(A.col + k));
            __m256d xv = _mm256_i32gather_pd(x, idx, 8);
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(A.val + k), xv, acc);
        }
        double s = hsum(acc);
        for (; k < end; ++k) s += A.val[k] * x[A.col[k]];
        y[r] = s;
    }
}

}  // namespace avx2

namespace {

Isa initial_isa() {
    const char* env = std::getenv("ASTS_SIMD");
    if (env && std::strcmp(env, "scalar") == 0) return Isa::scalar;
    return detected_isa();
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

Isa detected_isa() {
    __builtin_cpu_init();
    return (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) ? Isa::avx2 : Isa::scalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (isa == Isa::avx2 && detected_isa() != Isa::avx2) isa = Isa::scalar;
    current().store(isa, std::memory_order_relaxed);
}

const char* to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

double dot(const double* x, const double* y, std::size_t n) {
    return active_isa() == Isa::avx2 ? avx2::dot(x, y, n) : scalar::dot(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    active_isa() == Isa::avx2 ? avx2::axpy(a, x, y, n) : scalar::axpy(a, x, y, n);
}

void xpay(const double* x, double a, double* y, std::size_t n) {
    active_isa() == Isa::avx2 ? avx2::xpay(x, a, y, n) : scalar::xpay(x, a, y, n);
}

void scale_mul(const double* d, const double* x, double* y, std::size_t n) {
    active_isa() == Isa::avx2 ? avx2::scale_mul(d, x, y, n) : scalar::scale_mul(d, x, y, n);
}

void spmv(const CsrView& A, const double* x, double* y) {
    active_isa() == Isa::avx2 ? avx2::spmv(A, x, y) : scalar::spmv(A, x, y);
}

}  // namespace asts::kernels
