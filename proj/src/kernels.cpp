#include "recp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <omp.h>

namespace recp::kern {

namespace {

Exec g_exec = Exec::Parallel;

constexpr long kParMinWork = 1 << 15;

inline bool par(long work) { return g_exec == Exec::Parallel && work >= kParMinWork; }

inline void check_gemm(const DenseMatrix& a, const DenseMatrix& b, int ak, int bk,
                       const char* op) {
    if (ak != bk)
        throw DimensionError(std::string(op) + ": inner dimension mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
}

}  // namespace

Exec exec_mode() { return g_exec; }
void set_exec_mode(Exec e) { g_exec = e; }

// ---------------------------------------------------------------------------
// GEMM

namespace {

// one row tile per thread (capped) so the shared B operand is streamed as few
// times as possible; per-element accumulation order is unaffected by tiling
inline int row_tile(int n, bool parallel) {
    const int nthreads = parallel ? omp_get_max_threads() : 1;
    return std::clamp((n + nthreads - 1) / nthreads, 1, 64);
}

template <bool Acc>
void gemm_nn_impl(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    const int n = a.rows(), k = a.cols(), m = b.cols();
    const long work = 2L * n * k * m;
    constexpr int KC = 128;
    const int TI = row_tile(n, par(work));
    const int ntiles = (n + TI - 1) / TI;
#pragma omp parallel for schedule(static) if (par(work))
    for (int t = 0; t < ntiles; ++t) {
        const int i0 = t * TI, i1 = std::min(i0 + TI, n);
        if (!Acc)
            for (int i = i0; i < i1; ++i) std::fill(c.row(i), c.row(i) + m, 0.0);
        for (int kk = 0; kk < k; kk += KC) {
            const int kend = std::min(kk + KC, k);
            for (int i = i0; i < i1; ++i) {
                double* ci = c.row(i);
                const double* ai = a.row(i);
                for (int k2 = kk; k2 < kend; ++k2) {
                    const double av = ai[k2];
                    const double* bk2 = b.row(k2);
#pragma omp simd
                    for (int j = 0; j < m; ++j) ci[j] += av * bk2[j];
                }
            }
        }
    }
}

template <bool Acc>
void gemm_nt_impl(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    const int n = a.rows(), k = a.cols(), m = b.rows();
    const long work = 2L * n * k * m;
    constexpr int TJ = 64;
    const int TI = row_tile(n, par(work));
    const int ntiles = (n + TI - 1) / TI;
#pragma omp parallel for schedule(static) if (par(work))
    for (int t = 0; t < ntiles; ++t) {
        const int i0 = t * TI, i1 = std::min(i0 + TI, n);
        for (int jj = 0; jj < m; jj += TJ) {
            const int jend = std::min(jj + TJ, m);
            for (int i = i0; i < i1; ++i) {
                const double* ai = a.row(i);
                double* ci = c.row(i);
                for (int j = jj; j < jend; ++j) {
                    const double* bj = b.row(j);
                    double s = 0.0;
#pragma omp simd reduction(+ : s)
                    for (int k2 = 0; k2 < k; ++k2) s += ai[k2] * bj[k2];
                    if (Acc)
                        ci[j] += s;
                    else
                        ci[j] = s;
                }
            }
        }
    }
}

template <bool Acc>
void gemm_tn_impl(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    const int n = a.rows(), r = a.cols(), m = b.cols();
    const long work = 2L * n * r * m;
    constexpr int TR = 48;
    const int ntiles = (r + TR - 1) / TR;
#pragma omp parallel for schedule(static) if (par(work))
    for (int t = 0; t < ntiles; ++t) {
        const int r0 = t * TR, r1 = std::min(r0 + TR, r);
        if (!Acc)
            for (int rr = r0; rr < r1; ++rr) std::fill(c.row(rr), c.row(rr) + m, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* ai = a.row(i);
            const double* bi = b.row(i);
            for (int rr = r0; rr < r1; ++rr) {
                const double av = ai[rr];
                double* crr = c.row(rr);
#pragma omp simd
                for (int j = 0; j < m; ++j) crr[j] += av * bi[j];
            }
        }
    }
}

void require_out_shape(const DenseMatrix& c, int rows, int cols, const char* op) {
    if (c.rows() != rows || c.cols() != cols)
        throw DimensionError(std::string(op) + ": output is " + c.shape_str() + ", expected " +
                             std::to_string(rows) + "x" + std::to_string(cols));
}

}  // namespace

void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.cols(), b.rows(), "gemm_nn");
    if (c.rows() != a.rows() || c.cols() != b.cols()) c = DenseMatrix(a.rows(), b.cols());
    gemm_nn_impl<false>(a, b, c);
}

void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.cols(), b.cols(), "gemm_nt");
    if (c.rows() != a.rows() || c.cols() != b.rows()) c = DenseMatrix(a.rows(), b.rows());
    gemm_nt_impl<false>(a, b, c);
}

void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.rows(), b.rows(), "gemm_tn");
    if (c.rows() != a.cols() || c.cols() != b.cols()) c = DenseMatrix(a.cols(), b.cols());
    gemm_tn_impl<false>(a, b, c);
}

void gemm_nn_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.cols(), b.rows(), "gemm_nn_acc");
    require_out_shape(c, a.rows(), b.cols(), "gemm_nn_acc");
    gemm_nn_impl<true>(a, b, c);
}

void gemm_nt_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.cols(), b.cols(), "gemm_nt_acc");
    require_out_shape(c, a.rows(), b.rows(), "gemm_nt_acc");
    gemm_nt_impl<true>(a, b, c);
}

void gemm_tn_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.rows(), b.rows(), "gemm_tn_acc");
    require_out_shape(c, a.cols(), b.cols(), "gemm_tn_acc");
    gemm_tn_impl<true>(a, b, c);
}

void transpose(const DenseMatrix& a, DenseMatrix& out) {
    const int n = a.rows(), m = a.cols();
    if (out.rows() != m || out.cols() != n) out = DenseMatrix(m, n);
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out(j, i) = a(i, j);
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

template <class F>
inline void ew_loop(size_t size, F&& f) {
    const long n = static_cast<long>(size);
#pragma omp parallel for schedule(static) if (par(n))
    for (long i = 0; i < n; ++i) f(i);
}

}  // namespace

void ew_add(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    require_same_shape(a, b, "ew_add");
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const double *pa = a.data(), *pb = b.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] = pa[i] + pb[i]; });
}

void ew_sub(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    require_same_shape(a, b, "ew_sub");
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const double *pa = a.data(), *pb = b.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] = pa[i] - pb[i]; });
}

void ew_mul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    require_same_shape(a, b, "ew_mul");
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const double *pa = a.data(), *pb = b.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] = pa[i] * pb[i]; });
}

void ew_scale(const DenseMatrix& a, double s, DenseMatrix& out) {
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const double* pa = a.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] = s * pa[i]; });
}

void ew_acc(DenseMatrix& out, const DenseMatrix& a) {
    require_same_shape(out, a, "ew_acc");
    const double* pa = a.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] += pa[i]; });
}

void ew_acc_scaled(DenseMatrix& out, double s, const DenseMatrix& a) {
    require_same_shape(out, a, "ew_acc_scaled");
    const double* pa = a.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] += s * pa[i]; });
}

void ew_mul_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    require_same_shape(a, b, "ew_mul_acc");
    require_same_shape(a, out, "ew_mul_acc");
    const double *pa = a.data(), *pb = b.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] += pa[i] * pb[i]; });
}

void ew_acc_const(DenseMatrix& out, double c) {
    double* po = out.data();
    ew_loop(out.size(), [=](long i) { po[i] += c; });
}

void ew_acc_colvec(DenseMatrix& out, const DenseMatrix& v) {
    if (v.cols() != 1 || v.rows() != out.rows())
        throw DimensionError("ew_acc_colvec: vector " + v.shape_str() + " vs matrix " +
                             out.shape_str());
    const int n = out.rows(), m = out.cols();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double vi = v(i, 0);
        double* oi = out.row(i);
#pragma omp simd
        for (int j = 0; j < m; ++j) oi[j] += vi;
    }
}

void ew_acc_rowvec(DenseMatrix& out, const DenseMatrix& v) {
    if (v.rows() != 1 || v.cols() != out.cols())
        throw DimensionError("ew_acc_rowvec: vector " + v.shape_str() + " vs matrix " +
                             out.shape_str());
    const int n = out.rows(), m = out.cols();
    const double* pv = v.data();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        double* oi = out.row(i);
#pragma omp simd
        for (int j = 0; j < m; ++j) oi[j] += pv[j];
    }
}

void ew_exp(const DenseMatrix& a, DenseMatrix& out) {
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const double* pa = a.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] = std::exp(pa[i]); });
}

void ew_log_floor(const DenseMatrix& a, double floor, DenseMatrix& out) {
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const double* pa = a.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] = std::log(std::max(pa[i], floor)); });
}

void ew_log_floor_bw(const DenseMatrix& a, double floor, const DenseMatrix& g, DenseMatrix& gx) {
    require_same_shape(a, g, "ew_log_floor_bw");
    require_same_shape(a, gx, "ew_log_floor_bw");
    const double *pa = a.data(), *pg = g.data();
    double* po = gx.data();
    ew_loop(a.size(), [=](long i) { po[i] += pa[i] >= floor ? pg[i] / pa[i] : 0.0; });
}

void relu_fw(const DenseMatrix& a, DenseMatrix& out) {
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const double* pa = a.data();
    double* po = out.data();
    ew_loop(a.size(), [=](long i) { po[i] = pa[i] > 0.0 ? pa[i] : 0.0; });
}

void relu_bw(const DenseMatrix& x, const DenseMatrix& g, DenseMatrix& gx) {
    require_same_shape(x, g, "relu_bw");
    require_same_shape(x, gx, "relu_bw");
    const double *px = x.data(), *pg = g.data();
    double* po = gx.data();
    ew_loop(x.size(), [=](long i) { po[i] += px[i] > 0.0 ? pg[i] : 0.0; });
}

void add_rowvec(const DenseMatrix& a, const DenseMatrix& v, DenseMatrix& out) {
    if (v.rows() != 1 || v.cols() != a.cols())
        throw DimensionError("add_rowvec: vector " + v.shape_str() + " vs matrix " +
                             a.shape_str());
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const int n = a.rows(), m = a.cols();
    const double* pv = v.data();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
#pragma omp simd
        for (int j = 0; j < m; ++j) oi[j] = ai[j] + pv[j];
    }
}

void add_colvec(const DenseMatrix& a, const DenseMatrix& v, DenseMatrix& out) {
    if (v.cols() != 1 || v.rows() != a.rows())
        throw DimensionError("add_colvec: vector " + v.shape_str() + " vs matrix " +
                             a.shape_str());
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const int n = a.rows(), m = a.cols();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double vi = v(i, 0);
        const double* ai = a.row(i);
        double* oi = out.row(i);
#pragma omp simd
        for (int j = 0; j < m; ++j) oi[j] = ai[j] + vi;
    }
}

// ---------------------------------------------------------------------------
// Reductions

void row_sum(const DenseMatrix& a, DenseMatrix& out) {
    const int n = a.rows(), m = a.cols();
    if (out.rows() != n || out.cols() != 1) out = DenseMatrix(n, 1);
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (int j = 0; j < m; ++j) s += ai[j];
        out(i, 0) = s;
    }
}

void col_sum(const DenseMatrix& a, DenseMatrix& out) {
    const int n = a.rows(), m = a.cols();
    if (out.rows() != 1 || out.cols() != m) out = DenseMatrix(1, m);
    std::fill(out.data(), out.data() + m, 0.0);
    constexpr int TC = 256;
    const int ntiles = (m + TC - 1) / TC;
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int t = 0; t < ntiles; ++t) {
        const int j0 = t * TC, j1 = std::min(j0 + TC, m);
        double* po = out.data();
        for (int i = 0; i < n; ++i) {
            const double* ai = a.row(i);
#pragma omp simd
            for (int j = j0; j < j1; ++j) po[j] += ai[j];
        }
    }
}

double sum_all(const DenseMatrix& a) {
    const int n = a.rows(), m = a.cols();
    if (n == 0 || m == 0) return 0.0;
    std::vector<double> partial(n);
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (int j = 0; j < m; ++j) s += ai[j];
        partial[i] = s;
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += partial[i];
    return total;
}

// ---------------------------------------------------------------------------
// Softmax / L2 normalization

void softmax_rows_fw(const DenseMatrix& a, DenseMatrix& out) {
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const int n = a.rows(), m = a.cols();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        double mx = ai[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, ai[j]);
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            oi[j] = std::exp(ai[j] - mx);
            s += oi[j];
        }
        const double inv = 1.0 / s;
#pragma omp simd
        for (int j = 0; j < m; ++j) oi[j] *= inv;
    }
}

void softmax_rows_bw(const DenseMatrix& y, const DenseMatrix& g, DenseMatrix& gx) {
    require_same_shape(y, g, "softmax_rows_bw");
    require_same_shape(y, gx, "softmax_rows_bw");
    const int n = y.rows(), m = y.cols();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double* yi = y.row(i);
        const double* gi = g.row(i);
        double* oi = gx.row(i);
        double dot = 0.0;
#pragma omp simd reduction(+ : dot)
        for (int j = 0; j < m; ++j) dot += yi[j] * gi[j];
#pragma omp simd
        for (int j = 0; j < m; ++j) oi[j] += yi[j] * (gi[j] - dot);
    }
}

void l2norm_rows_fw(const DenseMatrix& a, double eps, DenseMatrix& out, DenseMatrix& norms) {
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const int n = a.rows(), m = a.cols();
    if (norms.rows() != n || norms.cols() != 1) norms = DenseMatrix(n, 1);
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (int j = 0; j < m; ++j) s += ai[j] * ai[j];
        const double nrm = std::sqrt(s);
        const double denom = std::max(nrm, eps);
        norms(i, 0) = nrm;
        const double inv = 1.0 / denom;
#pragma omp simd
        for (int j = 0; j < m; ++j) oi[j] = ai[j] * inv;
    }
}

void l2norm_rows_bw(const DenseMatrix& y, const DenseMatrix& norms, double eps,
                    const DenseMatrix& g, DenseMatrix& gx) {
    require_same_shape(y, g, "l2norm_rows_bw");
    require_same_shape(y, gx, "l2norm_rows_bw");
    const int n = y.rows(), m = y.cols();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int i = 0; i < n; ++i) {
        const double* yi = y.row(i);
        const double* gi = g.row(i);
        double* oi = gx.row(i);
        const double nrm = norms(i, 0);
        const double inv = 1.0 / std::max(nrm, eps);
        if (nrm >= eps) {
            double dot = 0.0;
#pragma omp simd reduction(+ : dot)
            for (int j = 0; j < m; ++j) dot += gi[j] * yi[j];
#pragma omp simd
            for (int j = 0; j < m; ++j) oi[j] += (gi[j] - dot * yi[j]) * inv;
        } else {
#pragma omp simd
            for (int j = 0; j < m; ++j) oi[j] += gi[j] * inv;
        }
    }
}

void zero_diagonal(const DenseMatrix& a, DenseMatrix& out) {
    if (a.rows() != a.cols())
        throw DimensionError("zero_diagonal: matrix not square, " + a.shape_str());
    if (!out.same_shape(a)) out = DenseMatrix(a.rows(), a.cols());
    const int n = a.rows();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * n))
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (int j = 0; j < n; ++j) oi[j] = ai[j];
        oi[i] = 0.0;
    }
}

// ---------------------------------------------------------------------------
// Batch normalization (column-wise)

void batchnorm_train_fw(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta,
                        double eps, DenseMatrix& y, DenseMatrix& mean, DenseMatrix& inv_std) {
    const int n = x.rows(), m = x.cols();
    if (n < 2) throw NumericError("batch_norm: degenerate batch of " + std::to_string(n) +
                                  " row(s) in train mode");
    if (!y.same_shape(x)) y = DenseMatrix(n, m);
    if (mean.cols() != m || mean.rows() != 1) mean = DenseMatrix(1, m);
    if (inv_std.cols() != m || inv_std.rows() != 1) inv_std = DenseMatrix(1, m);
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int j = 0; j < m; ++j) {
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += x(i, j);
        mu /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = x(i, j) - mu;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        mean(0, j) = mu;
        inv_std(0, j) = inv;
        const double gj = gamma(0, j), bj = beta(0, j);
        for (int i = 0; i < n; ++i) y(i, j) = gj * ((x(i, j) - mu) * inv) + bj;
    }
}

void batchnorm_train_bw(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& mean,
                        const DenseMatrix& inv_std, const DenseMatrix& g, DenseMatrix& gx,
                        DenseMatrix& ggamma, DenseMatrix& gbeta) {
    const int n = x.rows(), m = x.cols();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int j = 0; j < m; ++j) {
        const double mu = mean(0, j), inv = inv_std(0, j), gj = gamma(0, j);
        double sg = 0.0, sgx = 0.0;
        for (int i = 0; i < n; ++i) {
            const double xhat = (x(i, j) - mu) * inv;
            sg += g(i, j);
            sgx += g(i, j) * xhat;
        }
        ggamma(0, j) += sgx;
        gbeta(0, j) += sg;
        const double c = gj * inv / n;
        for (int i = 0; i < n; ++i) {
            const double xhat = (x(i, j) - mu) * inv;
            gx(i, j) += c * (n * g(i, j) - sg - xhat * sgx);
        }
    }
}

void batchnorm_eval_fw(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta,
                       const DenseMatrix& running_mean, const DenseMatrix& running_var, double eps,
                       DenseMatrix& y) {
    const int n = x.rows(), m = x.cols();
    if (!y.same_shape(x)) y = DenseMatrix(n, m);
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int j = 0; j < m; ++j) {
        const double inv = 1.0 / std::sqrt(running_var(0, j) + eps);
        const double mu = running_mean(0, j);
        const double gj = gamma(0, j), bj = beta(0, j);
        for (int i = 0; i < n; ++i) y(i, j) = gj * ((x(i, j) - mu) * inv) + bj;
    }
}

void batchnorm_eval_bw(const DenseMatrix& x, const DenseMatrix& gamma,
                       const DenseMatrix& running_mean, const DenseMatrix& running_var, double eps,
                       const DenseMatrix& g, DenseMatrix& gx, DenseMatrix& ggamma,
                       DenseMatrix& gbeta) {
    const int n = x.rows(), m = x.cols();
#pragma omp parallel for schedule(static) if (par(static_cast<long>(n) * m))
    for (int j = 0; j < m; ++j) {
        const double inv = 1.0 / std::sqrt(running_var(0, j) + eps);
        const double mu = running_mean(0, j);
        const double gj = gamma(0, j);
        double sg = 0.0, sgx = 0.0;
        for (int i = 0; i < n; ++i) {
            sg += g(i, j);
            sgx += g(i, j) * ((x(i, j) - mu) * inv);
            gx(i, j) += g(i, j) * gj * inv;
        }
        ggamma(0, j) += sgx;
        gbeta(0, j) += sg;
    }
}

// ---------------------------------------------------------------------------
// Naive references

namespace ref {

void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.cols(), b.rows(), "ref::gemm_nn");
    c = DenseMatrix(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
}

void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.cols(), b.cols(), "ref::gemm_nt");
    c = DenseMatrix(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
}

void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check_gemm(a, b, a.rows(), b.rows(), "ref::gemm_tn");
    c = DenseMatrix(a.cols(), b.cols());
    for (int i = 0; i < a.cols(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
            c(i, j) = s;
        }
}

double sum_all(const DenseMatrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) s += a(i, j);
    return s;
}

void softmax_rows(const DenseMatrix& a, DenseMatrix& out) {
    out = DenseMatrix(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        double mx = a(i, 0);
        for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, a(i, j));
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) {
            out(i, j) = std::exp(a(i, j) - mx);
            s += out(i, j);
        }
        for (int j = 0; j < a.cols(); ++j) out(i, j) /= s;
    }
}

}  // namespace ref

}  // namespace recp::kern
