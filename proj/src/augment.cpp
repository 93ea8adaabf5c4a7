#include "recp/augment.hpp"

#include "recp/errors.hpp"

namespace recp::augment {

namespace {

// uniform in [0,1) from the top 53 bits; cheaper than the std distribution
// and independent of the standard library's implementation
inline double unit_uniform(Rng& rng) { return (rng() >> 11) * 0x1.0p-53; }

void augment_row(const double* x, int len, double drop_rate, Rng& rng, double* out) {
    double l1_orig = 0.0, l1_kept = 0.0;
    for (int j = 0; j < len; ++j) {
        l1_orig += std::fabs(x[j]);
        const bool drop = unit_uniform(rng) < drop_rate;
        out[j] = drop ? 0.0 : x[j];
        l1_kept += std::fabs(out[j]);
    }
    if (l1_kept > 0.0 && l1_orig > 0.0) {
        const double scale = l1_orig / l1_kept;
        for (int j = 0; j < len; ++j) out[j] *= scale;
    }
}

}  // namespace

std::vector<double> augment_vector(std::span<const double> x, double drop_rate, Rng& rng) {
    if (drop_rate < 0.0 || drop_rate >= 1.0)
        throw ConfigError("augment: drop_rate must be in [0,1), got " + std::to_string(drop_rate));
    std::vector<double> out(x.size());
    augment_row(x.data(), static_cast<int>(x.size()), drop_rate, rng, out.data());
    return out;
}

PositiveSet make_positive_set(ViewKind view, int region, std::span<const double> x, int k,
                              double drop_rate, Rng& rng) {
    PositiveSet p;
    p.view = view;
    p.region = region;
    p.samples.reserve(k);
    for (int i = 0; i < k; ++i) p.samples.push_back(augment_vector(x, drop_rate, rng));
    return p;
}

DenseMatrix augment_matrix(const DenseMatrix& raw, double drop_rate, Rng& rng) {
    if (drop_rate < 0.0 || drop_rate >= 1.0)
        throw ConfigError("augment: drop_rate must be in [0,1), got " + std::to_string(drop_rate));
    DenseMatrix out(raw.rows(), raw.cols());
    for (int i = 0; i < raw.rows(); ++i)
        augment_row(raw.row(i), raw.cols(), drop_rate, rng, out.row(i));
    return out;
}

}  // namespace recp::augment
