#pragma once

#include "recp/matrix.hpp"

// Dense kernels backing every numeric operation in the project. Each kernel
// has one cache-tiled implementation whose outer loop runs under an OpenMP
// `parallel for if(...)` clause: per output element the floating-point
// accumulation order is fixed (ascending k / ascending row), so results are
// bit-identical for any thread count, including one.
//
// kern::ref holds naive textbook implementations kept as oracles for tests
// and as the baseline for the kernel benchmark.

namespace recp::kern {

enum class Exec { Serial, Parallel };

// Process-wide execution mode; Parallel by default.
Exec exec_mode();
void set_exec_mode(Exec e);

// c = a * b
void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
// c = a * b^T
void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
// c = a^T * b
void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);

// Accumulating variants (c += ...); c must already have the result shape.
// Backward passes use these to write into gradient buffers directly.
void gemm_nn_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
void gemm_nt_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
void gemm_tn_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);

void transpose(const DenseMatrix& a, DenseMatrix& out);

// Elementwise; shapes must match. out may alias a or b.
void ew_add(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void ew_sub(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void ew_mul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void ew_scale(const DenseMatrix& a, double s, DenseMatrix& out);
// out += a  /  out += s * a  /  out += a .* b  /  out += c
void ew_acc(DenseMatrix& out, const DenseMatrix& a);
void ew_acc_scaled(DenseMatrix& out, double s, const DenseMatrix& a);
void ew_mul_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void ew_acc_const(DenseMatrix& out, double c);
// out[i,j] += v[i]  /  out[i,j] += v[j]
void ew_acc_colvec(DenseMatrix& out, const DenseMatrix& v);
void ew_acc_rowvec(DenseMatrix& out, const DenseMatrix& v);
void ew_exp(const DenseMatrix& a, DenseMatrix& out);
// log(max(x, floor)); gradient is 1/x above the floor and 0 below.
void ew_log_floor(const DenseMatrix& a, double floor, DenseMatrix& out);
void ew_log_floor_bw(const DenseMatrix& a, double floor, const DenseMatrix& g, DenseMatrix& gx);

void relu_fw(const DenseMatrix& a, DenseMatrix& out);
// gx += g masked by x > 0 (subgradient at 0 is 0)
void relu_bw(const DenseMatrix& x, const DenseMatrix& g, DenseMatrix& gx);

// broadcast add: row vector v is 1 x cols, column vector v is rows x 1
void add_rowvec(const DenseMatrix& a, const DenseMatrix& v, DenseMatrix& out);
void add_colvec(const DenseMatrix& a, const DenseMatrix& v, DenseMatrix& out);

// Reductions. sum_all reduces per-row partials in ascending row order.
void row_sum(const DenseMatrix& a, DenseMatrix& out);  // n x 1
void col_sum(const DenseMatrix& a, DenseMatrix& out);  // 1 x c
double sum_all(const DenseMatrix& a);

// Row-stable softmax (per-row max subtraction).
void softmax_rows_fw(const DenseMatrix& a, DenseMatrix& out);
void softmax_rows_bw(const DenseMatrix& y, const DenseMatrix& g, DenseMatrix& gx);

// Rows scaled to unit L2 norm; rows with norm < eps are divided by eps.
void l2norm_rows_fw(const DenseMatrix& a, double eps, DenseMatrix& out, DenseMatrix& norms);
void l2norm_rows_bw(const DenseMatrix& y, const DenseMatrix& norms, double eps,
                    const DenseMatrix& g, DenseMatrix& gx);

void zero_diagonal(const DenseMatrix& a, DenseMatrix& out);

// Column-wise batch normalization. Train mode normalizes by batch statistics
// (biased variance) and reports them; eval mode uses the provided running
// statistics. Backward covers train mode's full dependence on mean/var.
void batchnorm_train_fw(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta,
                        double eps, DenseMatrix& y, DenseMatrix& mean, DenseMatrix& inv_std);
void batchnorm_train_bw(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& mean,
                        const DenseMatrix& inv_std, const DenseMatrix& g, DenseMatrix& gx,
                        DenseMatrix& ggamma, DenseMatrix& gbeta);
void batchnorm_eval_fw(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta,
                       const DenseMatrix& running_mean, const DenseMatrix& running_var, double eps,
                       DenseMatrix& y);
void batchnorm_eval_bw(const DenseMatrix& x, const DenseMatrix& gamma,
                       const DenseMatrix& running_mean, const DenseMatrix& running_var, double eps,
                       const DenseMatrix& g, DenseMatrix& gx, DenseMatrix& ggamma,
                       DenseMatrix& gbeta);

namespace ref {
// Naive serial references (triple loops, single accumulator).
void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
double sum_all(const DenseMatrix& a);
void softmax_rows(const DenseMatrix& a, DenseMatrix& out);
}  // namespace ref

}  // namespace recp::kern
