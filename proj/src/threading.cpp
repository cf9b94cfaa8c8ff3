#include "phn/threading.hpp"

#include <cstdlib>
#include <omp.h>

namespace phn {

namespace {
int resolve_auto() {
    if (const char* env = std::getenv("PHN_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return omp_get_max_threads();
}
int g_threads = 0;
} // namespace

void set_threads(int n) {
    g_threads = n < 0 ? 0 : n;
    omp_set_num_threads(g_threads == 0 ? resolve_auto() : g_threads);
}

int threads() { return g_threads == 0 ? resolve_auto() : g_threads; }

} // namespace phn
