#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "rpls/kernels.hpp"
#include "rpls/rng.hpp"

using namespace rpls;

TEST_CASE("every available kernel table agrees with the scalar reference") {
    const auto &ref = kernels::scalar_table();
    Rng rng(11);
    for (const auto *table : kernels::available_tables()) {
        CAPTURE(kernels::to_string(table->isa));
        for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 257}) {
            std::vector<double> a(n), b(n), w(n), y1(n), y2(n);
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = rng.normal();
                b[i] = rng.normal();
                w[i] = rng.uniform();
                y1[i] = y2[i] = rng.normal();
            }
            double scale = 1.0;
            for (std::size_t i = 0; i < n; ++i)
                scale += std::abs(a[i] * b[i]);
            CHECK(table->dot(a.data(), b.data(), n) ==
                  doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-13).scale(scale));
            CHECK(table->dot3(a.data(), w.data(), b.data(), n) ==
                  doctest::Approx(ref.dot3(a.data(), w.data(), b.data(), n)).scale(scale).epsilon(1e-13));
            table->axpy(0.75, a.data(), y1.data(), n);
            ref.axpy(0.75, a.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));
        }
    }
}

TEST_CASE("scalar table is always listed first") {
    const auto tables = kernels::available_tables();
    REQUIRE_FALSE(tables.empty());
    CHECK(tables.front()->isa == kernels::Isa::scalar);
}

TEST_CASE("span wrappers route through the active table") {
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6}, w{1, 0, 2};
    CHECK(kernels::dot(a, b) == 32.0);
    CHECK(kernels::dot3(a, w, b) == 4.0 + 36.0);
    std::vector<double> y{1, 1, 1};
    kernels::axpy(2.0, a, y);
    CHECK(y == std::vector<double>{3, 5, 7});
}
