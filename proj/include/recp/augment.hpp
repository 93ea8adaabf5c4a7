#pragma once

#include <span>
#include <vector>

#include "recp/matrix.hpp"
#include "recp/rng.hpp"

namespace recp::augment {

enum class ViewKind { Attribute, Outflow, Inflow };

// The positive samples drawn for one region in one view.
struct PositiveSet {
    ViewKind view = ViewKind::Attribute;
    int region = 0;
    std::vector<std::vector<double>> samples;
};

// Zeroes each entry independently with probability drop_rate, then rescales
// the survivors so the L1 norm matches the original (skipped when everything
// dropped or the original norm is zero). Runs on raw counts, before
// preprocessing.
std::vector<double> augment_vector(std::span<const double> x, double drop_rate, Rng& rng);

PositiveSet make_positive_set(ViewKind view, int region, std::span<const double> x, int k,
                              double drop_rate, Rng& rng);

// One augmented copy of every row of a raw feature matrix.
DenseMatrix augment_matrix(const DenseMatrix& raw, double drop_rate, Rng& rng);

}  // namespace recp::augment
