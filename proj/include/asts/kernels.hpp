#pragma once

#include <cstddef>
#include <cstdint>

namespace asts::kernels {

enum class Isa { scalar, avx2 };

// Best instruction set supported by the CPU, unless ASTS_SIMD=scalar.
Isa detected_isa();
Isa active_isa();
void set_isa(Isa isa);
const char* to_string(Isa isa);

// Compressed sparse row view; indices are 32-bit as in Eigen's default storage.
struct CsrView {
    std::ptrdiff_t rows = 0;
    const int* row_ptr = nullptr;
    const int* col = nullptr;
    const double* val = nullptr;
};

double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);      // y += a x
void xpay(const double* x, double a, double* y, std::size_t n);      // y = x + a y
void scale_mul(const double* d, const double* x, double* y, std::size_t n);  // y = d .* x
void spmv(const CsrView& A, const double* x, double* y);             // y = A x

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void xpay(const double* x, double a, double* y, std::size_t n);
void scale_mul(const double* d, const double* x, double* y, std::size_t n);
void spmv(const CsrView& A, const double* x, double* y);
}  // namespace scalar

namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void xpay(const double* x, double a, double* y, std::size_t n);
void scale_mul(const double* d, const double* x, double* y, std::size_t n);
void spmv(const CsrView& A, const double* x, double* y);
}  // namespace avx2

}  // namespace asts::kernels
