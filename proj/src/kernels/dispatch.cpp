#include <cstdlib>
#include <string>

#include "kernel_impl.hpp"

namespace rpls::kernels {

namespace detail {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

} // namespace detail

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar:
        return "scalar";
    case Isa::avx2:
        return "avx2";
    case Isa::neon:
        return "neon";
    }
    return "unknown";
}

std::vector<const KernelTable *> available_tables() {
    std::vector<const KernelTable *> tables{&scalar_table()};
    if (const auto *avx2 = detail::avx2_table(); avx2 != nullptr && detail::cpu_has_avx2())
        tables.push_back(avx2);
    if (const auto *neon = detail::neon_table(); neon != nullptr)
        tables.push_back(neon);
    return tables;
}

namespace {

const KernelTable &select_table() noexcept {
    const auto tables = available_tables();
    const char *requested = std::getenv("RPLS_SIMD");
    if (requested != nullptr && std::string(requested) != "auto") {
        for (const auto *table : tables)
            if (to_string(table->isa) == requested)
                return *table;
        return scalar_table();
    }
    return *tables.back();
}

} // namespace

const KernelTable &active() noexcept {
    static const KernelTable &table = select_table();
    return table;
}

} // namespace rpls::kernels
