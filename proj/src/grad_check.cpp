#include "recp/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recp/errors.hpp"
#include "recp/rng.hpp"

namespace recp {

double grad_check(const std::function<double(bool)>& loss_fn,
                  const std::vector<ParamTensor*>& params, double h, int max_coords,
                  uint64_t seed) {
    for (ParamTensor* p : params) p->zero_grad();
    const double base = loss_fn(true);
    if (!std::isfinite(base))
        throw NumericError("grad_check aborted: base loss is non-finite (" +
                           std::to_string(base) + ")");

    std::vector<DenseMatrix> analytic;
    analytic.reserve(params.size());
    for (ParamTensor* p : params) analytic.push_back(p->grad);

    Rng rng = make_rng(seed);
    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        ParamTensor& p = *params[pi];
        const int total = static_cast<int>(p.value.size());
        std::vector<int> coords(total);
        std::iota(coords.begin(), coords.end(), 0);
        if (total > max_coords) {
            // partial Fisher-Yates: first max_coords entries form the sample
            for (int i = 0; i < max_coords; ++i) {
                std::uniform_int_distribution<int> d(i, total - 1);
                std::swap(coords[i], coords[d(rng)]);
            }
            coords.resize(max_coords);
        }
        for (int c : coords) {
            double* w = p.value.data() + c;
            const double orig = *w;
            *w = orig + h;
            const double lp = loss_fn(false);
            *w = orig - h;
            const double lm = loss_fn(false);
            *w = orig;
            if (!std::isfinite(lp) || !std::isfinite(lm))
                throw NumericError("grad_check aborted: non-finite loss while perturbing " +
                                   p.name + "[" + std::to_string(c) + "]");
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[pi].data()[c];
            const double rel =
                std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace recp
