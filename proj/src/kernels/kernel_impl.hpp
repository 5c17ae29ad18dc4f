#pragma once

#include "rpls/kernels.hpp"

namespace rpls::kernels::detail {

const KernelTable *avx2_table() noexcept; // nullptr when not compiled in
const KernelTable *neon_table() noexcept; // nullptr when not compiled in
bool cpu_has_avx2() noexcept;

} // namespace rpls::kernels::detail
