#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recp/matrix.hpp"
#include "recp/rng.hpp"

namespace recp {

// A trainable matrix with its accumulated gradient and Adam moment state.
struct ParamTensor {
    std::string name;
    DenseMatrix value;
    DenseMatrix grad;
    DenseMatrix adam_m;
    DenseMatrix adam_v;
    uint64_t step_count = 0;

    ParamTensor() = default;
    ParamTensor(std::string n, int rows, int cols)
        : name(std::move(n)),
          value(rows, cols),
          grad(rows, cols),
          adam_m(rows, cols),
          adam_v(rows, cols) {}

    void zero_grad() { grad = DenseMatrix(value.rows(), value.cols()); }

    // Glorot-uniform fill: +-sqrt(6 / (fan_in + fan_out)).
    void init_glorot(Rng& rng, int fan_in, int fan_out) {
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (size_t i = 0; i < value.size(); ++i) value.data()[i] = dist(rng);
    }

    void fill(double x) {
        for (size_t i = 0; i < value.size(); ++i) value.data()[i] = x;
    }
};

// Bias-corrected Adam update on every parameter; increments step counts.
void adam_step(const std::vector<ParamTensor*>& params, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

void zero_grads(const std::vector<ParamTensor*>& params);

}  // namespace recp
