#include "recp/losses.hpp"

#include <cmath>

#include "recp/errors.hpp"

namespace recp::losses {

Tape::Id intra_contrastive(Tape& t, Tape::Id z, const std::vector<Tape::Id>& positives,
                           double tau) {
    if (tau <= 0.0)
        throw ConfigError("intra_contrastive: tau must be positive, got " + std::to_string(tau));
    if (positives.empty()) throw ConfigError("intra_contrastive: need at least one positive set");
    const double inv_tau = 1.0 / tau;

    const Tape::Id zn = t.l2_normalize_rows(z);
    Tape::Id pos_sum = -1;
    for (Tape::Id p : positives) {
        const Tape::Id pn = t.l2_normalize_rows(p);
        const Tape::Id e = t.exp(t.scale(t.row_sum(t.mul(zn, pn)), inv_tau));
        pos_sum = pos_sum < 0 ? e : t.add(pos_sum, e);
    }
    // similarities to every other region's embedding, diagonal removed
    const Tape::Id sims = t.exp(t.scale(t.matmul_nt(zn, zn), inv_tau));
    const Tape::Id neg_sum = t.row_sum(t.zero_diagonal(sims));
    const Tape::Id per_region =
        t.sub(t.log_floor(t.add(pos_sum, neg_sum)), t.log_floor(pos_sum));
    return t.sum_all(per_region);
}

Tape::Id reconstruction(Tape& t, Tape::Id x, Tape::Id xhat) {
    const Tape::Id diff = t.sub(x, xhat);
    return t.sum_all(t.mul(diff, diff));
}

Tape::Id joint_distribution_node(Tape& t, Tape::Id z_a, Tape::Id z_m) {
    const int n = t.value(z_a).rows();
    if (n == 0) throw DimensionError("joint_distribution: empty embedding");
    const Tape::Id ba = t.softmax_rows(z_a);
    const Tape::Id bm = t.softmax_rows(z_m);
    return t.scale(t.matmul_tn(ba, bm), 1.0 / n);
}

Tape::Id inter_contrastive(Tape& t, Tape::Id z_a, Tape::Id z_m, double alpha, double eps) {
    const Tape::Id m = joint_distribution_node(t, z_a, z_m);
    const Tape::Id mr = t.row_sum(m);
    const Tape::Id mc = t.col_sum(m);
    const double w = -(alpha + 1.0);
    Tape::Id term = t.log_floor(m, eps);
    term = t.add_colvec(term, t.scale(t.log_floor(mr, eps), w));
    term = t.add_rowvec(term, t.scale(t.log_floor(mc, eps), w));
    return t.scale(t.sum_all(t.mul(m, term)), -1.0);
}

Tape::Id dual_prediction(Tape& t, Tape::Id z_a, Tape::Id z_m, model::DualPredictor& f_a,
                         model::DualPredictor& f_m, bool train) {
    const Tape::Id m_hat = f_a.net.forward(t, z_a, train);
    const Tape::Id a_hat = f_m.net.forward(t, z_m, train);
    const Tape::Id da = t.sub(z_m, m_hat);
    const Tape::Id dm = t.sub(z_a, a_hat);
    return t.add(t.sum_all(t.mul(da, da)), t.sum_all(t.mul(dm, dm)));
}

JointDistribution joint_distribution(const DenseMatrix& z_a, const DenseMatrix& z_m) {
    require_same_shape(z_a, z_m, "joint_distribution");
    const int n = z_a.rows(), d = z_a.cols();
    if (n == 0) throw DimensionError("joint_distribution: empty embedding");
    DenseMatrix ba, bm;
    kern::softmax_rows_fw(z_a, ba);
    kern::softmax_rows_fw(z_m, bm);
    JointDistribution j;
    kern::gemm_tn(ba, bm, j.m);
    kern::ew_scale(j.m, 1.0 / n, j.m);
    j.row_marginals.assign(d, 0.0);
    j.col_marginals.assign(d, 0.0);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            j.row_marginals[r] += j.m(r, c);
            j.col_marginals[c] += j.m(r, c);
        }
    return j;
}

double mutual_information(const JointDistribution& j, double eps) {
    const int d = j.m.rows();
    double info = 0.0;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            const double p = j.m(r, c);
            if (p <= 0.0) continue;
            info += p * (std::log(std::max(p, eps)) - std::log(std::max(j.row_marginals[r], eps)) -
                         std::log(std::max(j.col_marginals[c], eps)));
        }
    return info;
}

std::pair<double, double> marginal_entropies(const JointDistribution& j, double eps) {
    double ha = 0.0, hm = 0.0;
    for (double p : j.row_marginals)
        if (p > 0.0) ha -= p * std::log(std::max(p, eps));
    for (double p : j.col_marginals)
        if (p > 0.0) hm -= p * std::log(std::max(p, eps));
    return {ha, hm};
}

double inter_contrastive_value(const JointDistribution& j, double alpha, double eps) {
    const int d = j.m.rows();
    double total = 0.0;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            const double p = j.m(r, c);
            if (p <= 0.0) continue;
            total -= p * (std::log(std::max(p, eps)) -
                          (alpha + 1.0) * std::log(std::max(j.row_marginals[r], eps)) -
                          (alpha + 1.0) * std::log(std::max(j.col_marginals[c], eps)));
        }
    return total;
}

double intra_contrastive_total(double l_a, double l_m, double mu) { return mu * l_a + l_m; }

double LossBreakdown::recombine() const {
    // same term order and weighting as the tape accumulation in
    // train::build_objective, so the match is exact up to rounding
    bool any = false;
    double total = 0.0;
    auto acc = [&](const std::optional<double>& v, double w) {
        if (!v) return;
        total = any ? total + w * *v : w * *v;
        any = true;
    };
    acc(l_dp, 1.0);
    acc(l_cl_inter, 1.0);
    acc(l_cl_a, lambda1 * mu);
    acc(l_cl_m, lambda1);
    acc(l_rec_a, lambda2 * mu);
    acc(l_rec_s, lambda2);
    acc(l_rec_d, lambda2);
    return total;
}

bool LossBreakdown::all_finite() const {
    const auto ok = [](const std::optional<double>& v) { return !v || std::isfinite(*v); };
    return std::isfinite(total) && ok(l_cl_a) && ok(l_cl_m) && ok(l_rec_a) && ok(l_rec_s) &&
           ok(l_rec_d) && ok(l_cl_inter) && ok(l_dp);
}

double total_loss(const LossBreakdown& parts) { return parts.recombine(); }

}  // namespace recp::losses
