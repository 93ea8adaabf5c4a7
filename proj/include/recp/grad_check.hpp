#pragma once

#include <functional>
#include <vector>

#include "recp/param.hpp"

namespace recp {

// Central-difference gradient check. loss_fn(true) must populate the
// parameter grads (they arrive zeroed) and return the loss; loss_fn(false)
// returns the loss only.
// Samples at most max_coords coordinates per tensor. Returns the max over
// sampled coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws NumericError if the loss is non-finite.
double grad_check(const std::function<double(bool with_grad)>& loss_fn,
                  const std::vector<ParamTensor*>& params, double h = 1e-5,
                  int max_coords = 200, uint64_t seed = 12345);

}  // namespace recp
