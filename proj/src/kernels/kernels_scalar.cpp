#include "kernel_impl.hpp"

namespace rpls::kernels {
namespace {

double dot_scalar(const double *a, const double *b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sum += a[i] * b[i];
    return sum;
}

double dot3_scalar(const double *a, const double *w, const double *b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sum += a[i] * w[i] * b[i];
    return sum;
}

void axpy_scalar(double alpha, const double *x, double *y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

constexpr KernelTable kScalar{Isa::scalar, dot_scalar, dot3_scalar, axpy_scalar};

} // namespace

const KernelTable &scalar_table() noexcept { return kScalar; }

} // namespace rpls::kernels
