#include <cmath>

#include "doctest.h"
#include "recp/grad_check.hpp"
#include "recp/losses.hpp"
#include "test_helpers.hpp"

using namespace recp;
using namespace recp::losses;
using recp::testing::random_matrix;

namespace {

JointDistribution make_joint(DenseMatrix m) {
    JointDistribution j;
    j.row_marginals.assign(m.rows(), 0.0);
    j.col_marginals.assign(m.cols(), 0.0);
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            j.row_marginals[r] += m(r, c);
            j.col_marginals[c] += m(r, c);
        }
    j.m = std::move(m);
    return j;
}

double intra_value(const DenseMatrix& z, const std::vector<DenseMatrix>& positives, double tau) {
    Tape t;
    std::vector<Tape::Id> pos;
    for (const DenseMatrix& p : positives) pos.push_back(t.leaf(p));
    return t.scalar(intra_contrastive(t, t.leaf(z), pos, tau));
}

}  // namespace

TEST_CASE("intra-view loss: single region with one positive cancels to zero") {
    DenseMatrix z(1, 3);
    z(0, 0) = 0.2;
    z(0, 1) = -0.4;
    z(0, 2) = 0.9;
    CHECK(intra_value(z, {z}, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("intra-view loss matches the direct two-region formula") {
    // d=1 embeddings normalize to +-1; positives identical to anchors
    DenseMatrix z(2, 1);
    z(0, 0) = 2.0;   // -> +1
    z(1, 0) = -0.5;  // -> -1
    const double s = -1.0;  // anchor . negative
    const double expected = 2.0 * (std::log(std::exp(1.0) + std::exp(s)) - 1.0);
    CHECK(intra_value(z, {z}, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("intra-view loss drops when a positive moves toward its anchor") {
    DenseMatrix z(2, 2);
    z(0, 0) = 1.0;
    z(0, 1) = 0.0;
    z(1, 0) = 0.0;
    z(1, 1) = 1.0;
    DenseMatrix close = z;          // region 0's positive equals its anchor
    DenseMatrix far = z;
    far(0, 0) = 0.6;
    far(0, 1) = 0.8;  // rotated away
    CHECK(intra_value(z, {close}, 0.5) < intra_value(z, {far}, 0.5));
}

TEST_CASE("intra totals combine with the attribute weight") {
    CHECK(intra_contrastive_total(5.0, 3.0, 0.0) == 3.0);
    CHECK(intra_contrastive_total(1.0, 1.0, 1.0) == 2.0);
    const double l_a = 1.7, l_m = 0.3, mu = 1e-4;
    CHECK(intra_contrastive_total(l_a, l_m, mu) == doctest::Approx(mu * l_a + l_m));
}

TEST_CASE("reconstruction is the summed squared error") {
    Rng rng = make_rng(21);
    const DenseMatrix x = random_matrix(6, 5, rng);
    Tape t;
    CHECK(t.scalar(reconstruction(t, t.leaf(x), t.leaf(x))) == 0.0);

    DenseMatrix shifted = x;
    for (size_t i = 0; i < shifted.size(); ++i) shifted.data()[i] += 1.0;
    Tape t2;
    CHECK(t2.scalar(reconstruction(t2, t2.leaf(x), t2.leaf(shifted))) ==
          doctest::Approx(30.0).epsilon(1e-12));

    const DenseMatrix xhat = random_matrix(6, 5, rng);
    double brute = 0.0;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 5; ++j) brute += (x(i, j) - xhat(i, j)) * (x(i, j) - xhat(i, j));
    Tape t3;
    CHECK(t3.scalar(reconstruction(t3, t3.leaf(x), t3.leaf(xhat))) ==
          doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("joint distribution: uniform, concentrated, and random cases") {
    DenseMatrix z(1, 2);  // single region, both views at the origin
    const JointDistribution uniform = joint_distribution(z, z);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) CHECK(uniform.m(r, c) == doctest::Approx(0.25).epsilon(1e-12));

    DenseMatrix hot(5, 3);
    for (int i = 0; i < 5; ++i) hot(i, 0) = 50.0;  // softmax -> e_1
    const JointDistribution concentrated = joint_distribution(hot, hot);
    CHECK(concentrated.m(0, 0) == doctest::Approx(1.0).epsilon(1e-9));

    Rng rng = make_rng(22);
    const DenseMatrix z_a = random_matrix(7, 4, rng), z_m = random_matrix(7, 4, rng);
    const JointDistribution j = joint_distribution(z_a, z_m);
    double total = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            CHECK(j.m(r, c) >= 0.0);
            total += j.m(r, c);
        }
    CHECK(std::fabs(total - 1.0) <= 1e-12);
}

TEST_CASE("mutual information: independence, diagonal, and brute force") {
    DenseMatrix rank1(2, 2);
    const double u[2] = {0.3, 0.7}, v[2] = {0.6, 0.4};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) rank1(r, c) = u[r] * v[c];
    CHECK(std::fabs(mutual_information(make_joint(rank1))) <= 1e-9);

    DenseMatrix diag(2, 2);
    diag(0, 0) = 0.5;
    diag(1, 1) = 0.5;
    CHECK(mutual_information(make_joint(diag)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Rng rng = make_rng(23);
    DenseMatrix m = random_matrix(5, 5, rng, 0.01, 1.0);
    double total = 0.0;
    for (size_t i = 0; i < m.size(); ++i) total += m.data()[i];
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] /= total;
    const JointDistribution j = make_joint(m);
    double brute = 0.0;
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c)
            brute += j.m(r, c) *
                     std::log(j.m(r, c) / (j.row_marginals[r] * j.col_marginals[c]));
    CHECK(mutual_information(j) == doctest::Approx(brute).epsilon(1e-12));
    CHECK(mutual_information(j) >= -1e-9);
}

TEST_CASE("marginal entropies: one-hot, uniform, brute force") {
    DenseMatrix onehot(2, 2);
    onehot(0, 0) = 1.0;
    const auto [ha0, hm0] = marginal_entropies(make_joint(onehot));
    CHECK(ha0 == doctest::Approx(0.0));
    CHECK(hm0 == doctest::Approx(0.0));

    DenseMatrix uni(4, 4, 1.0 / 16.0);
    const auto [ha, hm] = marginal_entropies(make_joint(uni));
    CHECK(ha == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(hm == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Rng rng = make_rng(24);
    DenseMatrix m = random_matrix(3, 3, rng, 0.01, 1.0);
    double total = 0.0;
    for (size_t i = 0; i < m.size(); ++i) total += m.data()[i];
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] /= total;
    const JointDistribution j = make_joint(m);
    double ba = 0.0, bm = 0.0;
    for (double p : j.row_marginals) ba -= p * std::log(p);
    for (double p : j.col_marginals) bm -= p * std::log(p);
    const auto [ra, rm] = marginal_entropies(j);
    CHECK(ra == doctest::Approx(ba).epsilon(1e-12));
    CHECK(rm == doctest::Approx(bm).epsilon(1e-12));
    CHECK(ra >= 0.0);
    CHECK(ra <= std::log(3.0) + 1e-9);
}

TEST_CASE("inter-view loss: alpha=0 reduces to negative mutual information") {
    Rng rng = make_rng(25);
    const DenseMatrix z_a = random_matrix(9, 5, rng), z_m = random_matrix(9, 5, rng);
    const JointDistribution j = joint_distribution(z_a, z_m);
    CHECK(inter_contrastive_value(j, 0.0) ==
          doctest::Approx(-mutual_information(j)).epsilon(1e-10));
}

TEST_CASE("inter-view loss reproduces the -19 log 2 diagonal anchor") {
    DenseMatrix diag(2, 2);
    diag(0, 0) = 0.5;
    diag(1, 1) = 0.5;
    const double value = inter_contrastive_value(make_joint(diag), 9.0);
    CHECK(value == doctest::Approx(-19.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(value == doctest::Approx(-13.1695).epsilon(1e-4));
}

TEST_CASE("entropy-form and matrix-form inter-view losses are identical") {
    Rng rng = make_rng(26);
    for (int trial = 0; trial < 100; ++trial) {
        const DenseMatrix z_a = random_matrix(8, 6, rng, -2.0, 2.0);
        const DenseMatrix z_m = random_matrix(8, 6, rng, -2.0, 2.0);
        const JointDistribution j = joint_distribution(z_a, z_m);
        const double direct = inter_contrastive_value(j, 9.0);
        const auto [ha, hm] = marginal_entropies(j);
        const double via_entropy = -(mutual_information(j) + 9.0 * (ha + hm));
        CHECK(direct == doctest::Approx(via_entropy).epsilon(1e-9));

        // the tape node computes the same number
        Tape t;
        const double on_tape = t.scalar(inter_contrastive(t, t.leaf(z_a), t.leaf(z_m), 9.0));
        CHECK(on_tape == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("dual prediction: zero cases and nonnegativity") {
    model::DualPredictor f_a("f_a", 3, 4), f_m("f_m", 3, 4);  // zero weights
    DenseMatrix zero(5, 3);
    Tape t;
    CHECK(t.scalar(dual_prediction(t, t.leaf(zero), t.leaf(zero), f_a, f_m, true)) == 0.0);

    Rng rng = make_rng(27);
    const DenseMatrix z_a = random_matrix(5, 3, rng);
    double norm2 = 0.0;
    for (size_t i = 0; i < z_a.size(); ++i) norm2 += z_a.data()[i] * z_a.data()[i];
    Tape t2;
    // predictions are zero, z_m is zero: only || z_a - F(z_m) ||^2 remains
    CHECK(t2.scalar(dual_prediction(t2, t2.leaf(z_a), t2.leaf(zero), f_a, f_m, true)) ==
          doctest::Approx(norm2).epsilon(1e-12));

    model::DualPredictor g_a("g_a", 3, 4), g_m("g_m", 3, 4);
    g_a.net.init(rng);
    g_m.net.init(rng);
    const DenseMatrix z_m = random_matrix(5, 3, rng);
    Tape t3;
    const Tape::Id loss = dual_prediction(t3, t3.leaf(z_a), t3.leaf(z_m), g_a, g_m, true);
    CHECK(t3.scalar(loss) >= 0.0);
}

TEST_CASE("dual prediction matches a brute-force sum over its own predictions") {
    Rng rng = make_rng(28);
    model::DualPredictor f_a("f_a", 4, 6), f_m("f_m", 4, 6);
    f_a.net.init(rng);
    f_m.net.init(rng);
    const DenseMatrix z_a = random_matrix(7, 4, rng), z_m = random_matrix(7, 4, rng);
    Tape t;
    const Tape::Id ia = t.leaf(z_a), im = t.leaf(z_m);
    const Tape::Id m_hat = f_a.net.forward(t, ia, true);
    const Tape::Id a_hat = f_m.net.forward(t, im, true);
    double brute = 0.0;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 4; ++j) {
            const double dm = z_m(i, j) - t.value(m_hat)(i, j);
            const double da = z_a(i, j) - t.value(a_hat)(i, j);
            brute += dm * dm + da * da;
        }
    Tape t2;
    // fresh tape so batch-norm sees the same running stats state
    f_a.net.bn_state[0] = BatchNormState(6);
    f_a.net.bn_state[1] = BatchNormState(6);
    f_m.net.bn_state[0] = BatchNormState(6);
    f_m.net.bn_state[1] = BatchNormState(6);
    CHECK(t2.scalar(dual_prediction(t2, t2.leaf(z_a), t2.leaf(z_m), f_a, f_m, true)) ==
          doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("total loss recombination") {
    LossBreakdown parts;
    parts.mu = 1.0;
    parts.lambda1 = 1.0;
    parts.lambda2 = 1.0;
    parts.l_dp = 1.0;
    parts.l_cl_inter = 1.0;
    parts.l_cl_a = 1.0;
    parts.l_cl_m = 1.0;
    parts.l_rec_a = 1.0;
    parts.l_rec_s = 1.0;
    parts.l_rec_d = 1.0;
    CHECK(total_loss(parts) == doctest::Approx(7.0));

    parts.lambda1 = 0.0;
    parts.lambda2 = 0.0;
    CHECK(total_loss(parts) == doctest::Approx(2.0));  // inter-view terms only
}

TEST_CASE("every loss passes a gradient check on toy shapes") {
    Rng rng = make_rng(29);

    SUBCASE("intra contrastive") {
        ParamTensor z("z", 6, 4), p1("p1", 6, 4), p2("p2", 6, 4);
        z.value = random_matrix(6, 4, rng);
        p1.value = random_matrix(6, 4, rng);
        p2.value = random_matrix(6, 4, rng);
        auto loss_fn = [&](bool wg) {
            Tape t;
            const Tape::Id loss =
                intra_contrastive(t, t.param(z), {t.param(p1), t.param(p2)}, 0.5);
            if (wg) t.backward(loss);
            return t.scalar(loss);
        };
        CHECK(grad_check(loss_fn, {&z, &p1, &p2}, 1e-5) < 1e-4);
    }

    SUBCASE("inter contrastive") {
        ParamTensor z_a("z_a", 6, 5), z_m("z_m", 6, 5);
        z_a.value = random_matrix(6, 5, rng);
        z_m.value = random_matrix(6, 5, rng);
        auto loss_fn = [&](bool wg) {
            Tape t;
            const Tape::Id loss = inter_contrastive(t, t.param(z_a), t.param(z_m), 9.0);
            if (wg) t.backward(loss);
            return t.scalar(loss);
        };
        CHECK(grad_check(loss_fn, {&z_a, &z_m}, 1e-5) < 1e-4);
    }

    SUBCASE("dual prediction") {
        model::DualPredictor f_a("f_a", 3, 4), f_m("f_m", 3, 4);
        f_a.net.init(rng);
        f_m.net.init(rng);
        ParamTensor z_a("z_a", 6, 3), z_m("z_m", 6, 3);
        z_a.value = random_matrix(6, 3, rng);
        z_m.value = random_matrix(6, 3, rng);
        std::vector<ParamTensor*> params{&z_a, &z_m};
        f_a.net.collect_params(params);
        f_m.net.collect_params(params);
        auto loss_fn = [&](bool wg) {
            Tape t;
            const Tape::Id loss =
                dual_prediction(t, t.param(z_a), t.param(z_m), f_a, f_m, true);
            if (wg) t.backward(loss);
            return t.scalar(loss);
        };
        CHECK(grad_check(loss_fn, params, 1e-5) < 1e-4);
    }

    SUBCASE("reconstruction") {
        ParamTensor xhat("xhat", 5, 7);
        xhat.value = random_matrix(5, 7, rng);
        const DenseMatrix x = random_matrix(5, 7, rng);
        auto loss_fn = [&](bool wg) {
            Tape t;
            const Tape::Id loss = reconstruction(t, t.leaf(x), t.param(xhat));
            if (wg) t.backward(loss);
            return t.scalar(loss);
        };
        CHECK(grad_check(loss_fn, {&xhat}, 1e-5) < 1e-4);
    }
}

TEST_CASE("intra contrastive rejects nonpositive temperature") {
    DenseMatrix z(2, 2, 1.0);
    Tape t;
    const Tape::Id iz = t.leaf(z);
    CHECK_THROWS_AS(intra_contrastive(t, iz, {iz}, 0.0), ConfigError);
    CHECK_THROWS_AS(intra_contrastive(t, iz, {iz}, -1.0), ConfigError);
}
