// Benchmark of the tiled OpenMP kernels against the naive serial references,
// at the matrix shapes the training loop actually hits. Also verifies that
// the production kernel gives bit-identical results in serial and parallel
// execution modes.

#include <cstdio>
#include <omp.h>

#include "recp/kernels.hpp"
#include "recp/rng.hpp"

using namespace recp;

namespace {

DenseMatrix random_matrix(int r, int c, Rng& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    DenseMatrix m(r, c);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

template <class F>
double time_best_of(int reps, F&& f) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        const double t0 = omp_get_wtime();
        f();
        best = std::min(best, omp_get_wtime() - t0);
    }
    return best;
}

void bench_gemm(const char* name, int n, int k, int m,
                void (*fast)(const DenseMatrix&, const DenseMatrix&, DenseMatrix&),
                void (*naive)(const DenseMatrix&, const DenseMatrix&, DenseMatrix&), Rng& rng,
                bool a_is_nk, bool b_is_km) {
    const DenseMatrix a = a_is_nk ? random_matrix(n, k, rng) : random_matrix(k, n, rng);
    const DenseMatrix b = b_is_km ? random_matrix(k, m, rng) : random_matrix(m, k, rng);
    DenseMatrix c_ref, c_serial, c_par;
    const double flops = 2.0 * n * k * m;

    const double t_ref = time_best_of(3, [&] { naive(a, b, c_ref); });
    kern::set_exec_mode(kern::Exec::Serial);
    const double t_ser = time_best_of(3, [&] { fast(a, b, c_serial); });
    kern::set_exec_mode(kern::Exec::Parallel);
    const double t_par = time_best_of(3, [&] { fast(a, b, c_par); });

    const bool identical = c_serial == c_par;
    double max_diff = 0.0;
    for (size_t i = 0; i < c_ref.size(); ++i)
        max_diff = std::max(max_diff, std::fabs(c_ref.data()[i] - c_par.data()[i]));

    std::printf("%-28s naive %7.2f  tiled(1t) %7.2f  tiled(%dt) %7.2f GF/s"
                "  speedup %4.1fx  serial==parallel %s  |ref diff| %.1e\n",
                name, flops / t_ref / 1e9, flops / t_ser / 1e9, omp_get_max_threads(),
                flops / t_par / 1e9, t_ref / t_par, identical ? "yes" : "NO", max_diff);
}

}  // namespace

int main() {
    Rng rng = make_rng(42);
    std::printf("threads: %d\n", omp_get_max_threads());

    // encoder / decoder shapes of the default synthetic city (n=80, N_t=24)
    bench_gemm("gemm_nn 80x1920x128", 80, 1920, 128, kern::gemm_nn, kern::ref::gemm_nn, rng, true,
               true);
    bench_gemm("gemm_nt 80x128 x 1920x128", 80, 128, 1920, kern::gemm_nt, kern::ref::gemm_nt, rng,
               true, false);
    bench_gemm("gemm_tn 80x1920 ^T x 80x128", 1920, 80, 128, kern::gemm_tn, kern::ref::gemm_tn,
               rng, false, true);
    // square reference point
    bench_gemm("gemm_nn 512x512x512", 512, 512, 512, kern::gemm_nn, kern::ref::gemm_nn, rng, true,
               true);

    {
        const DenseMatrix x = random_matrix(4096, 512, rng);
        DenseMatrix y;
        const double t_ref = time_best_of(3, [&] { kern::ref::softmax_rows(x, y); });
        kern::set_exec_mode(kern::Exec::Parallel);
        const double t_par = time_best_of(3, [&] { kern::softmax_rows_fw(x, y); });
        std::printf("%-28s naive %7.2f ms  parallel %7.2f ms  speedup %4.1fx\n",
                    "softmax_rows 4096x512", t_ref * 1e3, t_par * 1e3, t_ref / t_par);
        const double s_ref = kern::ref::sum_all(x);
        const double s_par = kern::sum_all(x);
        std::printf("%-28s naive-vs-twophase diff %.1e\n", "sum_all 4096x512",
                    std::fabs(s_ref - s_par));
    }
    return 0;
}
