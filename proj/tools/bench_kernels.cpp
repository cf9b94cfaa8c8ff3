// Compares the OpenMP kernels against their serial reference loops.
#include <cstdio>
#include <omp.h>
#include <string>

#include "phn/geometry.hpp"
#include "phn/rng.hpp"
#include "phn/threading.hpp"
#include "phn/whitening.hpp"

namespace {

phn::Mat random_points(std::size_t n, std::size_t d, const phn::GeometryConfig& g, phn::Rng& rng) {
    phn::Mat m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        phn::Vec v(d);
        for (auto& x : v) x = rng.gaussian();
        auto p = phn::exp_map0(v, g);
        for (std::size_t j = 0; j < d; ++j) m(i, j) = p[j];
    }
    return m;
}

template <class F> double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        double t0 = omp_get_wtime();
        f();
        double t1 = omp_get_wtime();
        if (t1 - t0 < best) best = t1 - t0;
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    int nthreads = 0;
    if (argc > 1) nthreads = std::stoi(argv[1]);
    phn::set_threads(nthreads);

    phn::GeometryConfig g{0.01, 1e-5, 64};
    phn::Rng rng(12345);

    std::printf("threads = %d\n", phn::threads());
    std::printf("%-28s %10s %10s %8s\n", "kernel", "serial(s)", "omp(s)", "speedup");

    {
        auto A = random_points(512, 64, g, rng);
        auto B = random_points(512, 64, g, rng);
        double ts = time_best_of(3, [&] { (void)phn::reference::pairwise_distances(A, B, g); });
        double tp = time_best_of(3, [&] { (void)phn::pairwise_distances(A, B, g); });
        std::printf("%-28s %10.4f %10.4f %8.2f\n", "pairwise 512x512 d=64", ts, tp, ts / tp);
        auto S = phn::reference::pairwise_distances(A, B, g);
        auto P = phn::pairwise_distances(A, B, g);
        if (S.a != P.a) {
            std::printf("MISMATCH: omp pairwise differs from serial reference\n");
            return 1;
        }
    }
    {
        phn::Mat Z(256, 160);
        for (auto& x : Z.a) x = rng.uniform(-5.0, 5.0);
        double ts = time_best_of(3, [&] { (void)phn::reference::dimension_similarity_matrix(Z, g); });
        double tp = time_best_of(3, [&] { (void)phn::dimension_similarity_matrix(Z, g); });
        std::printf("%-28s %10.4f %10.4f %8.2f\n", "simmatrix B=256 D=160", ts, tp, ts / tp);
        auto S = phn::reference::dimension_similarity_matrix(Z, g);
        auto P = phn::dimension_similarity_matrix(Z, g);
        if (S.values.a != P.values.a) {
            std::printf("MISMATCH: omp similarity matrix differs from serial reference\n");
            return 1;
        }
    }
    std::printf("kernels match serial reference bit-for-bit\n");
    return 0;
}
