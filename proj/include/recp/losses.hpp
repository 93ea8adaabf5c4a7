#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "recp/model.hpp"
#include "recp/tape.hpp"

namespace recp::losses {

// d x d joint probability matrix of the softmaxed view embeddings, with its
// row and column marginals. Entries are nonnegative and sum to 1.
struct JointDistribution {
    DenseMatrix m;
    std::vector<double> row_marginals;
    std::vector<double> col_marginals;
};

// --- tape-recorded losses (differentiable) -----------------------------------

// Multi-positive contrastive loss within one view. z holds the anchor
// embeddings, positives the K encoded positive-sample matrices (n x d each).
// Per region: -log sum_k exp(sim(i,k)/tau) + log(sum_k exp(sim(i,k)/tau) +
// sum_{t != i} exp(sim(i,t)/tau)), summed over regions. Embeddings are
// L2-normalized inside the similarity only.
Tape::Id intra_contrastive(Tape& t, Tape::Id z, const std::vector<Tape::Id>& positives,
                           double tau);

// Sum over regions of squared reconstruction error.
Tape::Id reconstruction(Tape& t, Tape::Id x, Tape::Id xhat);

// M = (1/n) * softmax(z_a)^T softmax(z_m)
Tape::Id joint_distribution_node(Tape& t, Tape::Id z_a, Tape::Id z_m);

// -sum_{rr'} M_rr' ln(M_rr' / (M_r^{alpha+1} M_r'^{alpha+1})); equals
// -(I(M) + alpha (H_a + H_m)).
Tape::Id inter_contrastive(Tape& t, Tape::Id z_a, Tape::Id z_m, double alpha,
                           double eps = 1e-12);

// sum_i ||z_m_i - F_a(z_a_i)||^2 + ||z_a_i - F_m(z_m_i)||^2; gradients flow
// through both predictors and both embeddings.
Tape::Id dual_prediction(Tape& t, Tape::Id z_a, Tape::Id z_m, model::DualPredictor& f_a,
                         model::DualPredictor& f_m, bool train);

// --- plain evaluations --------------------------------------------------------

JointDistribution joint_distribution(const DenseMatrix& z_a, const DenseMatrix& z_m);

// 0*log(0/..) contributes 0; logs are floored at eps.
double mutual_information(const JointDistribution& j, double eps = 1e-12);
std::pair<double, double> marginal_entropies(const JointDistribution& j, double eps = 1e-12);
double inter_contrastive_value(const JointDistribution& j, double alpha, double eps = 1e-12);

// mu * l_attribute + l_mobility
double intra_contrastive_total(double l_a, double l_m, double mu);

// Per-term values of one epoch; absent terms were disabled by the ablation.
struct LossBreakdown {
    std::optional<double> l_cl_a, l_cl_m;
    std::optional<double> l_rec_a, l_rec_s, l_rec_d;
    std::optional<double> l_cl_inter, l_dp;
    double total = 0.0;
    double mu = 1e-4, alpha = 9.0, lambda1 = 1.0, lambda2 = 1.0, tau = 0.5;

    // Recombines total from the present parts; matches `total` to 1e-10.
    double recombine() const;
    bool all_finite() const;
};

// L = (L_dp + L_cl_inter) + lambda1 * L_cl_intra + lambda2 * L_rec_intra
double total_loss(const LossBreakdown& parts);

}  // namespace recp::losses
