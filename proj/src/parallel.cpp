#include "afcc/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace afcc::parallel {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() { return g_max_threads.load(); }

int resolved_threads() {
    int n = g_max_threads.load();
#ifdef _OPENMP
    if (n == 0) return omp_get_max_threads();
    return n;
#else
    (void)n;
    return 1;
#endif
}

bool serial() { return resolved_threads() <= 1; }

}  // namespace afcc::parallel
