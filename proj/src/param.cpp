#include "recp/param.hpp"

#include <cmath>

namespace recp {

void adam_step(const std::vector<ParamTensor*>& params, double lr, double beta1, double beta2,
               double eps) {
    for (ParamTensor* p : params) {
        p->step_count += 1;
        const double t = static_cast<double>(p->step_count);
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        double* w = p->value.data();
        double* g = p->grad.data();
        double* m = p->adam_m.data();
        double* v = p->adam_v.data();
        const long sz = static_cast<long>(p->value.size());
#pragma omp parallel for schedule(static) if (sz >= 1 << 15)
        for (long i = 0; i < sz; ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void zero_grads(const std::vector<ParamTensor*>& params) {
    for (ParamTensor* p : params) p->zero_grad();
}

}  // namespace recp
