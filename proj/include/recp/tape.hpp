#pragma once

#include <functional>
#include <vector>

#include "recp/kernels.hpp"
#include "recp/matrix.hpp"
#include "recp/param.hpp"

namespace recp {

// Running statistics owned by a batch-norm layer; updated as a side effect of
// the train-mode forward pass with momentum 0.9.
struct BatchNormState {
    DenseMatrix running_mean;
    DenseMatrix running_var;
    double momentum = 0.9;

    BatchNormState() = default;
    explicit BatchNormState(int c) : running_mean(1, c, 0.0), running_var(1, c, 1.0) {}
};

// Reverse-mode tape over matrix primitives. Operations append nodes in
// recording order; backward() visits them in exact reverse order and
// accumulates into the grads of bound ParamTensors. Rebuilding the same graph
// from identical inputs reproduces identical values bit for bit.
class Tape {
  public:
    using Id = int;

    Id leaf(DenseMatrix v);
    Id param(ParamTensor& p);

    Id matmul(Id a, Id b);     // A * B
    Id matmul_nt(Id a, Id b);  // A * B^T
    Id matmul_tn(Id a, Id b);  // A^T * B

    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);  // elementwise
    Id scale(Id a, double s);
    Id add_rowvec(Id a, Id v);
    Id add_colvec(Id a, Id v);

    Id relu(Id a);
    Id exp(Id a);
    Id log_floor(Id a, double floor = 1e-12);
    Id softmax_rows(Id a);
    Id l2_normalize_rows(Id a, double eps = 1e-12);

    Id row_sum(Id a);  // n x 1
    Id col_sum(Id a);  // 1 x c
    Id sum_all(Id a);  // 1 x 1
    Id zero_diagonal(Id a);

    Id batch_norm(Id x, Id gamma, Id beta, BatchNormState& state, bool train, double eps = 1e-5);

    const DenseMatrix& value(Id id) const { return nodes_[id].val; }
    const DenseMatrix& grad(Id id) const { return nodes_[id].grad; }
    double scalar(Id id) const;

    // Seeds d(loss)/d(loss)=1 and propagates; loss must be 1x1. Accumulates
    // into bound ParamTensor grads.
    void backward(Id loss);

    size_t size() const { return nodes_.size(); }

    bool requires_grad(Id id) const { return nodes_[id].requires_grad; }

  private:
    struct Node {
        DenseMatrix val;
        DenseMatrix grad;
        ParamTensor* bound = nullptr;
        std::function<void(Tape&)> back;
        bool requires_grad = false;
    };

    // Ops record a backward closure only when some input requires a gradient;
    // gradients are neither allocated nor propagated for constant subgraphs.
    Id push(DenseMatrix v, bool requires_grad = false) {
        nodes_.push_back(Node{std::move(v), {}, nullptr, nullptr, requires_grad});
        return static_cast<Id>(nodes_.size() - 1);
    }

    bool any_grad(std::initializer_list<Id> ids) const {
        for (Id i : ids)
            if (nodes_[i].requires_grad) return true;
        return false;
    }

    std::vector<Node> nodes_;
};

}  // namespace recp
