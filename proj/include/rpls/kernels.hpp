#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

// Data-parallel inner loops of the GLM (linear predictor, score, information).
// Every kernel has a scalar reference implementation; vector variants are
// chosen once at runtime and must agree with the reference to rounding.

namespace rpls::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
    Isa isa;
    /// sum_i a[i] * b[i]
    double (*dot)(const double *a, const double *b, std::size_t n);
    /// sum_i a[i] * w[i] * b[i]
    double (*dot3)(const double *a, const double *w, const double *b, std::size_t n);
    /// y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double *x, double *y, std::size_t n);
};

const KernelTable &scalar_table() noexcept;

/// Tables compiled in and supported by the running CPU, scalar first.
std::vector<const KernelTable *> available_tables();

/// The table used by the library. Picks the widest supported ISA unless the
/// RPLS_SIMD environment variable names one (`scalar`, `avx2`, `neon`).
const KernelTable &active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().dot(a.data(), b.data(), a.size());
}

inline double dot3(std::span<const double> a, std::span<const double> w,
                   std::span<const double> b) noexcept {
    return active().dot3(a.data(), w.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

} // namespace rpls::kernels
