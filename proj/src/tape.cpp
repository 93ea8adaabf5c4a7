#include "recp/tape.hpp"

#include <cmath>

namespace recp {

namespace k = kern;

Tape::Id Tape::leaf(DenseMatrix v) { return push(std::move(v), false); }

Tape::Id Tape::param(ParamTensor& p) {
    Id id = push(p.value, true);
    nodes_[id].bound = &p;
    return id;
}

Tape::Id Tape::matmul(Id a, Id b) {
    DenseMatrix c;
    k::gemm_nn(nodes_[a].val, nodes_[b].val, c);
    const bool rg = any_grad({a, b});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, b, id](Tape& t) {
            if (t.nodes_[a].requires_grad)
                k::gemm_nt_acc(t.nodes_[id].grad, t.nodes_[b].val, t.nodes_[a].grad);  // += G B^T
            if (t.nodes_[b].requires_grad)
                k::gemm_tn_acc(t.nodes_[a].val, t.nodes_[id].grad, t.nodes_[b].grad);  // += A^T G
        };
    return id;
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
    DenseMatrix c;
    k::gemm_nt(nodes_[a].val, nodes_[b].val, c);
    const bool rg = any_grad({a, b});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, b, id](Tape& t) {
            if (t.nodes_[a].requires_grad)
                k::gemm_nn_acc(t.nodes_[id].grad, t.nodes_[b].val, t.nodes_[a].grad);  // += G B
            if (t.nodes_[b].requires_grad)
                k::gemm_tn_acc(t.nodes_[id].grad, t.nodes_[a].val, t.nodes_[b].grad);  // += G^T A
        };
    return id;
}

Tape::Id Tape::matmul_tn(Id a, Id b) {
    DenseMatrix c;
    k::gemm_tn(nodes_[a].val, nodes_[b].val, c);
    const bool rg = any_grad({a, b});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, b, id](Tape& t) {
            if (t.nodes_[a].requires_grad)
                k::gemm_nt_acc(t.nodes_[b].val, t.nodes_[id].grad, t.nodes_[a].grad);  // += B G^T
            if (t.nodes_[b].requires_grad)
                k::gemm_nn_acc(t.nodes_[a].val, t.nodes_[id].grad, t.nodes_[b].grad);  // += A G
        };
    return id;
}

Tape::Id Tape::add(Id a, Id b) {
    DenseMatrix c;
    k::ew_add(nodes_[a].val, nodes_[b].val, c);
    const bool rg = any_grad({a, b});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, b, id](Tape& t) {
            if (t.nodes_[a].requires_grad) k::ew_acc(t.nodes_[a].grad, t.nodes_[id].grad);
            if (t.nodes_[b].requires_grad) k::ew_acc(t.nodes_[b].grad, t.nodes_[id].grad);
        };
    return id;
}

Tape::Id Tape::sub(Id a, Id b) {
    DenseMatrix c;
    k::ew_sub(nodes_[a].val, nodes_[b].val, c);
    const bool rg = any_grad({a, b});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, b, id](Tape& t) {
            if (t.nodes_[a].requires_grad) k::ew_acc(t.nodes_[a].grad, t.nodes_[id].grad);
            if (t.nodes_[b].requires_grad)
                k::ew_acc_scaled(t.nodes_[b].grad, -1.0, t.nodes_[id].grad);
        };
    return id;
}

Tape::Id Tape::mul(Id a, Id b) {
    DenseMatrix c;
    k::ew_mul(nodes_[a].val, nodes_[b].val, c);
    const bool rg = any_grad({a, b});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, b, id](Tape& t) {
            if (t.nodes_[a].requires_grad)
                k::ew_mul_acc(t.nodes_[id].grad, t.nodes_[b].val, t.nodes_[a].grad);
            if (t.nodes_[b].requires_grad)
                k::ew_mul_acc(t.nodes_[id].grad, t.nodes_[a].val, t.nodes_[b].grad);
        };
    return id;
}

Tape::Id Tape::scale(Id a, double s) {
    DenseMatrix c;
    k::ew_scale(nodes_[a].val, s, c);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, s, id](Tape& t) {
            k::ew_acc_scaled(t.nodes_[a].grad, s, t.nodes_[id].grad);
        };
    return id;
}

Tape::Id Tape::add_rowvec(Id a, Id v) {
    DenseMatrix c;
    k::add_rowvec(nodes_[a].val, nodes_[v].val, c);
    const bool rg = any_grad({a, v});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, v, id](Tape& t) {
            if (t.nodes_[a].requires_grad) k::ew_acc(t.nodes_[a].grad, t.nodes_[id].grad);
            if (t.nodes_[v].requires_grad) {
                DenseMatrix tmp;
                k::col_sum(t.nodes_[id].grad, tmp);
                k::ew_acc(t.nodes_[v].grad, tmp);
            }
        };
    return id;
}

Tape::Id Tape::add_colvec(Id a, Id v) {
    DenseMatrix c;
    k::add_colvec(nodes_[a].val, nodes_[v].val, c);
    const bool rg = any_grad({a, v});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, v, id](Tape& t) {
            if (t.nodes_[a].requires_grad) k::ew_acc(t.nodes_[a].grad, t.nodes_[id].grad);
            if (t.nodes_[v].requires_grad) {
                DenseMatrix tmp;
                k::row_sum(t.nodes_[id].grad, tmp);
                k::ew_acc(t.nodes_[v].grad, tmp);
            }
        };
    return id;
}

Tape::Id Tape::relu(Id a) {
    DenseMatrix c;
    k::relu_fw(nodes_[a].val, c);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, id](Tape& t) {
            k::relu_bw(t.nodes_[a].val, t.nodes_[id].grad, t.nodes_[a].grad);
        };
    return id;
}

Tape::Id Tape::exp(Id a) {
    DenseMatrix c;
    k::ew_exp(nodes_[a].val, c);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, id](Tape& t) {
            k::ew_mul_acc(t.nodes_[id].grad, t.nodes_[id].val, t.nodes_[a].grad);
        };
    return id;
}

Tape::Id Tape::log_floor(Id a, double floor) {
    DenseMatrix c;
    k::ew_log_floor(nodes_[a].val, floor, c);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, floor, id](Tape& t) {
            k::ew_log_floor_bw(t.nodes_[a].val, floor, t.nodes_[id].grad, t.nodes_[a].grad);
        };
    return id;
}

Tape::Id Tape::softmax_rows(Id a) {
    DenseMatrix c;
    k::softmax_rows_fw(nodes_[a].val, c);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, id](Tape& t) {
            k::softmax_rows_bw(t.nodes_[id].val, t.nodes_[id].grad, t.nodes_[a].grad);
        };
    return id;
}

Tape::Id Tape::l2_normalize_rows(Id a, double eps) {
    DenseMatrix c, norms;
    k::l2norm_rows_fw(nodes_[a].val, eps, c, norms);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, id, eps, norms = std::move(norms)](Tape& t) {
            k::l2norm_rows_bw(t.nodes_[id].val, norms, eps, t.nodes_[id].grad, t.nodes_[a].grad);
        };
    return id;
}

Tape::Id Tape::row_sum(Id a) {
    DenseMatrix c;
    k::row_sum(nodes_[a].val, c);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, id](Tape& t) {
            k::ew_acc_colvec(t.nodes_[a].grad, t.nodes_[id].grad);
        };
    return id;
}

Tape::Id Tape::col_sum(Id a) {
    DenseMatrix c;
    k::col_sum(nodes_[a].val, c);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, id](Tape& t) {
            k::ew_acc_rowvec(t.nodes_[a].grad, t.nodes_[id].grad);
        };
    return id;
}

Tape::Id Tape::sum_all(Id a) {
    DenseMatrix c(1, 1);
    c(0, 0) = k::sum_all(nodes_[a].val);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, id](Tape& t) {
            k::ew_acc_const(t.nodes_[a].grad, t.nodes_[id].grad(0, 0));
        };
    return id;
}

Tape::Id Tape::zero_diagonal(Id a) {
    DenseMatrix c;
    k::zero_diagonal(nodes_[a].val, c);
    const bool rg = any_grad({a});
    Id id = push(std::move(c), rg);
    if (rg)
        nodes_[id].back = [a, id](Tape& t) {
            DenseMatrix masked;
            k::zero_diagonal(t.nodes_[id].grad, masked);
            k::ew_acc(t.nodes_[a].grad, masked);
        };
    return id;
}

Tape::Id Tape::batch_norm(Id x, Id gamma, Id beta, BatchNormState& state, bool train,
                          double eps) {
    const DenseMatrix& xv = nodes_[x].val;
    if (nodes_[gamma].val.cols() != xv.cols() || nodes_[beta].val.cols() != xv.cols())
        throw DimensionError("batch_norm: gamma/beta width " + nodes_[gamma].val.shape_str() +
                             " vs input " + xv.shape_str());
    const bool rg = any_grad({x, gamma, beta});
    DenseMatrix y;
    if (train) {
        DenseMatrix mean, inv_std;
        k::batchnorm_train_fw(xv, nodes_[gamma].val, nodes_[beta].val, eps, y, mean, inv_std);
        // running <- momentum * running + (1 - momentum) * batch
        const double mom = state.momentum;
        for (int j = 0; j < xv.cols(); ++j) {
            const double var = 1.0 / (inv_std(0, j) * inv_std(0, j)) - eps;
            state.running_mean(0, j) = mom * state.running_mean(0, j) + (1.0 - mom) * mean(0, j);
            state.running_var(0, j) = mom * state.running_var(0, j) + (1.0 - mom) * var;
        }
        Id id = push(std::move(y), rg);
        if (rg)
            nodes_[id].back = [x, gamma, beta, id, mean = std::move(mean),
                               inv_std = std::move(inv_std)](Tape& t) {
                // scratch for inputs that do not need their gradient
                auto grad_or_scratch = [&t](Id n, DenseMatrix& scratch) -> DenseMatrix& {
                    if (t.nodes_[n].requires_grad) return t.nodes_[n].grad;
                    scratch = DenseMatrix(t.nodes_[n].val.rows(), t.nodes_[n].val.cols());
                    return scratch;
                };
                DenseMatrix sx, sg, sb;
                k::batchnorm_train_bw(t.nodes_[x].val, t.nodes_[gamma].val, mean, inv_std,
                                      t.nodes_[id].grad, grad_or_scratch(x, sx),
                                      grad_or_scratch(gamma, sg), grad_or_scratch(beta, sb));
            };
        return id;
    }
    k::batchnorm_eval_fw(xv, nodes_[gamma].val, nodes_[beta].val, state.running_mean,
                         state.running_var, eps, y);
    Id id = push(std::move(y), rg);
    if (rg)
        nodes_[id].back = [x, gamma, beta, id, rm = state.running_mean, rv = state.running_var,
                           eps](Tape& t) {
            auto grad_or_scratch = [&t](Id n, DenseMatrix& scratch) -> DenseMatrix& {
                if (t.nodes_[n].requires_grad) return t.nodes_[n].grad;
                scratch = DenseMatrix(t.nodes_[n].val.rows(), t.nodes_[n].val.cols());
                return scratch;
            };
            DenseMatrix sx, sg, sb;
            k::batchnorm_eval_bw(t.nodes_[x].val, t.nodes_[gamma].val, rm, rv, eps,
                                 t.nodes_[id].grad, grad_or_scratch(x, sx),
                                 grad_or_scratch(gamma, sg), grad_or_scratch(beta, sb));
        };
    return id;
}

double Tape::scalar(Id id) const {
    const DenseMatrix& v = nodes_[id].val;
    if (v.rows() != 1 || v.cols() != 1)
        throw DimensionError("scalar: node is " + v.shape_str() + ", expected 1x1");
    return v(0, 0);
}

void Tape::backward(Id loss) {
    const DenseMatrix& lv = nodes_[loss].val;
    if (lv.rows() != 1 || lv.cols() != 1)
        throw DimensionError("backward: loss node is " + lv.shape_str() + ", expected 1x1");
    for (Node& n : nodes_)
        if (n.requires_grad) n.grad = DenseMatrix(n.val.rows(), n.val.cols());
    if (!nodes_[loss].requires_grad) nodes_[loss].grad = DenseMatrix(1, 1);
    nodes_[loss].grad(0, 0) = 1.0;
    for (Id i = static_cast<Id>(nodes_.size()) - 1; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back(*this);
    for (Node& n : nodes_)
        if (n.bound) kern::ew_acc(n.bound->grad, n.grad);
}

}  // namespace recp
