#pragma once

#include <cstddef>

namespace mrsr::detail {

// Mirror indexing without edge duplication: [-1] -> [1], [n] -> [n-2].
// Valid for any offset via the 2(n-1) period; a length-1 axis maps to 0.
inline std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (n - 1);
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - m;
}

}  // namespace mrsr::detail
