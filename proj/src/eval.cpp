#include "recp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "recp/errors.hpp"
#include "recp/rng.hpp"

namespace recp::eval {

namespace {

double sq_dist(const double* a, const double* b, int p) {
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int j = 0; j < p; ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

}  // namespace

KMeansResult kmeans(const DenseMatrix& e, int k, int restarts, int max_iter, uint64_t seed) {
    const int n = e.rows(), p = e.cols();
    if (k < 1 || k > n)
        throw DimensionError("kmeans: k=" + std::to_string(k) + " outside [1," +
                             std::to_string(n) + "]");
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < restarts; ++restart) {
        Rng rng = make_rng(derive_seed(seed, 0x4B3A45u, restart));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> uniform_pt(0, n - 1);

        // k-means++: next centroid drawn proportional to squared distance to
        // the nearest chosen one
        DenseMatrix centroids(k, p);
        std::vector<double> d2(n, std::numeric_limits<double>::infinity());
        int first = uniform_pt(rng);
        std::copy(e.row(first), e.row(first) + p, centroids.row(0));
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                d2[i] = std::min(d2[i], sq_dist(e.row(i), centroids.row(c - 1), p));
                total += d2[i];
            }
            int pick;
            if (total <= 0.0) {
                pick = uniform_pt(rng);
            } else {
                const double target = unit(rng) * total;
                double acc = 0.0;
                pick = n - 1;
                for (int i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (target < acc) {
                        pick = i;
                        break;
                    }
                }
            }
            std::copy(e.row(pick), e.row(pick) + p, centroids.row(c));
        }

        std::vector<int> labels(n, 0), prev(n, -1);
        std::vector<double> dist_to_own(n, 0.0);
        double inertia = 0.0;
        for (int iter = 0; iter < max_iter; ++iter) {
#pragma omp parallel for schedule(static) if (static_cast<long>(n) * p * k > 1 << 15)
            for (int i = 0; i < n; ++i) {
                double bd = std::numeric_limits<double>::infinity();
                int bc = 0;
                for (int c = 0; c < k; ++c) {
                    const double d = sq_dist(e.row(i), centroids.row(c), p);
                    if (d < bd) {
                        bd = d;
                        bc = c;
                    }
                }
                labels[i] = bc;
                dist_to_own[i] = bd;
            }
            inertia = std::accumulate(dist_to_own.begin(), dist_to_own.end(), 0.0);
            if (labels == prev) break;
            prev = labels;

            std::vector<int> counts(k, 0);
            DenseMatrix sums(k, p);
            for (int i = 0; i < n; ++i) {
                ++counts[labels[i]];
                const double* xi = e.row(i);
                double* s = sums.row(labels[i]);
                for (int j = 0; j < p; ++j) s[j] += xi[j];
            }
            std::vector<bool> claimed(n, false);
            for (int c = 0; c < k; ++c) {
                if (counts[c] > 0) {
                    const double inv = 1.0 / counts[c];
                    for (int j = 0; j < p; ++j) centroids(c, j) = sums(c, j) * inv;
                } else {
                    // reseed from the farthest unclaimed point
                    int far = -1;
                    double fd = -1.0;
                    for (int i = 0; i < n; ++i)
                        if (!claimed[i] && dist_to_own[i] > fd) {
                            fd = dist_to_own[i];
                            far = i;
                        }
                    claimed[far] = true;
                    std::copy(e.row(far), e.row(far) + p, centroids.row(c));
                }
            }
        }
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.labels = labels;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Clustering agreement metrics

namespace {

struct Contingency {
    int ka = 0, kb = 0;
    long long n = 0;
    std::vector<long long> cells;  // ka x kb
    std::vector<long long> am, bm;
};

std::vector<int> compress_labels(std::span<const int> v, int& k) {
    std::vector<int> out(v.size());
    // dense fast path for small nonnegative ids
    int mx = -1;
    bool dense = true;
    for (int x : v) {
        if (x < 0 || x >= 1024) {
            dense = false;
            break;
        }
        mx = std::max(mx, x);
    }
    if (dense) {
        std::vector<int> remap(mx + 1, -1);
        k = 0;
        for (size_t i = 0; i < v.size(); ++i) {
            if (remap[v[i]] < 0) remap[v[i]] = k++;
            out[i] = remap[v[i]];
        }
        return out;
    }
    std::unordered_map<int, int> remap;
    k = 0;
    for (size_t i = 0; i < v.size(); ++i) {
        auto [it, inserted] = remap.try_emplace(v[i], k);
        if (inserted) ++k;
        out[i] = it->second;
    }
    return out;
}

Contingency build_contingency(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size())
        throw DimensionError("labelings differ in length: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    if (a.empty()) throw DimensionError("empty labelings");
    Contingency c;
    const std::vector<int> ca = compress_labels(a, c.ka);
    const std::vector<int> cb = compress_labels(b, c.kb);
    c.n = static_cast<long long>(a.size());
    c.cells.assign(static_cast<size_t>(c.ka) * c.kb, 0);
    c.am.assign(c.ka, 0);
    c.bm.assign(c.kb, 0);
    for (size_t i = 0; i < ca.size(); ++i) {
        ++c.cells[static_cast<size_t>(ca[i]) * c.kb + cb[i]];
        ++c.am[ca[i]];
        ++c.bm[cb[i]];
    }
    return c;
}

inline double comb2(long long x) { return 0.5 * static_cast<double>(x) * (x - 1); }

}  // namespace

double nmi(std::span<const int> a, std::span<const int> b) {
    const Contingency c = build_contingency(a, b);
    const double n = static_cast<double>(c.n);
    double ha = 0.0, hb = 0.0;
    for (long long x : c.am)
        if (x > 0) ha -= (x / n) * std::log(x / n);
    for (long long x : c.bm)
        if (x > 0) hb -= (x / n) * std::log(x / n);
    if (ha <= 0.0 && hb <= 0.0) return 1.0;  // two single-cluster labelings
    if (ha <= 0.0 || hb <= 0.0) return 0.0;
    double mi = 0.0;
    for (int i = 0; i < c.ka; ++i)
        for (int j = 0; j < c.kb; ++j) {
            const long long nij = c.cells[static_cast<size_t>(i) * c.kb + j];
            if (nij <= 0) continue;
            mi += (nij / n) * std::log(nij * n / (static_cast<double>(c.am[i]) * c.bm[j]));
        }
    return mi / std::sqrt(ha * hb);
}

double ari(std::span<const int> a, std::span<const int> b) {
    const Contingency c = build_contingency(a, b);
    double s11 = 0.0;
    for (long long x : c.cells) s11 += comb2(x);
    double sa = 0.0, sb = 0.0;
    for (long long x : c.am) sa += comb2(x);
    for (long long x : c.bm) sb += comb2(x);
    const double pairs = comb2(c.n);
    if (pairs <= 0.0) return 1.0;
    const double expected = sa * sb / pairs;
    const double denom = 0.5 * (sa + sb) - expected;
    if (std::fabs(denom) < 1e-300) return 1.0;  // both sides degenerate
    return (s11 - expected) / denom;
}

double f_measure(std::span<const int> a, std::span<const int> b) {
    const Contingency c = build_contingency(a, b);
    double tp = 0.0;
    for (long long x : c.cells) tp += comb2(x);
    double sa = 0.0, sb = 0.0;
    for (long long x : c.am) sa += comb2(x);
    for (long long x : c.bm) sb += comb2(x);
    if (sa <= 0.0 && sb <= 0.0) return 1.0;  // both all-singletons
    if (tp <= 0.0) return 0.0;
    const double precision = tp / sb;
    const double recall = tp / sa;
    return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------

double MetricSummary::mean() const {
    if (runs.empty()) return 0.0;
    return std::accumulate(runs.begin(), runs.end(), 0.0) / runs.size();
}

double MetricSummary::stddev() const {
    if (runs.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double x : runs) s += (x - m) * (x - m);
    return std::sqrt(s / runs.size());
}

ClusterReport evaluate_clustering(const DenseMatrix& e, std::span<const int> truth, int k,
                                  int runs, uint64_t seed) {
    if (static_cast<int>(truth.size()) != e.rows())
        throw DimensionError("evaluate_clustering: " + std::to_string(truth.size()) +
                             " labels for " + std::to_string(e.rows()) + " rows");
    ClusterReport r;
    r.k = k;
    for (int run = 0; run < runs; ++run) {
        const KMeansResult km = kmeans(e, k, 10, 100, derive_seed(seed, 0xC1u, run));
        r.nmi.runs.push_back(nmi(truth, km.labels));
        r.ari.runs.push_back(ari(truth, km.labels));
        r.f.runs.push_back(f_measure(truth, km.labels));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Lasso

namespace {

inline double soft_threshold(double x, double a) {
    if (x > a) return x - a;
    if (x < -a) return x + a;
    return 0.0;
}

}  // namespace

double lasso_objective(const DenseMatrix& x, std::span<const double> y,
                       std::span<const double> w, double b, double a) {
    const int m = x.rows(), p = x.cols();
    double sse = 0.0;
    for (int i = 0; i < m; ++i) {
        double pred = b;
        const double* xi = x.row(i);
        for (int j = 0; j < p; ++j) pred += xi[j] * w[j];
        sse += (y[i] - pred) * (y[i] - pred);
    }
    double l1 = 0.0;
    for (double v : w) l1 += std::fabs(v);
    return sse / (2.0 * m) + a * l1;
}

LassoFit fit_lasso(const DenseMatrix& x, std::span<const double> y, double a, int max_sweeps,
                   double tol, std::vector<double>* objective_trace) {
    const int m = x.rows(), p = x.cols();
    if (m == 0 || static_cast<int>(y.size()) != m)
        throw DimensionError("fit_lasso: " + std::to_string(y.size()) + " targets for " +
                             std::to_string(m) + " rows");
    LassoFit fit;
    fit.w.assign(p, 0.0);
    fit.intercept = std::accumulate(y.begin(), y.end(), 0.0) / m;

    std::vector<double> z(p, 0.0);  // (1/m) ||x_j||^2
    for (int i = 0; i < m; ++i) {
        const double* xi = x.row(i);
        for (int j = 0; j < p; ++j) z[j] += xi[j] * xi[j];
    }
    for (double& v : z) v /= m;

    std::vector<double> r(m);
    for (int i = 0; i < m; ++i) r[i] = y[i] - fit.intercept;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        const double db = std::accumulate(r.begin(), r.end(), 0.0) / m;
        if (db != 0.0) {
            fit.intercept += db;
            for (double& v : r) v -= db;
            max_change = std::fabs(db);
        }
        for (int j = 0; j < p; ++j) {
            if (z[j] <= 0.0) continue;
            double rho = 0.0;
            for (int i = 0; i < m; ++i) rho += x(i, j) * r[i];
            rho = rho / m + z[j] * fit.w[j];
            const double wn = soft_threshold(rho, a) / z[j];
            const double diff = wn - fit.w[j];
            if (diff != 0.0) {
                for (int i = 0; i < m; ++i) r[i] -= diff * x(i, j);
                fit.w[j] = wn;
                max_change = std::max(max_change, std::fabs(diff));
            }
        }
        fit.sweeps = sweep + 1;
        if (objective_trace)
            objective_trace->push_back(lasso_objective(x, y, fit.w, fit.intercept, a));
        if (max_change < tol) break;
    }
    fit.objective = lasso_objective(x, y, fit.w, fit.intercept, a);
    return fit;
}

namespace {

struct Scaler {
    std::vector<double> mean, inv_std;

    void fit(const DenseMatrix& x, std::span<const int> idx) {
        const int p = x.cols();
        mean.assign(p, 0.0);
        inv_std.assign(p, 0.0);
        for (int i : idx)
            for (int j = 0; j < p; ++j) mean[j] += x(i, j);
        for (double& v : mean) v /= static_cast<double>(idx.size());
        std::vector<double> var(p, 0.0);
        for (int i : idx)
            for (int j = 0; j < p; ++j) {
                const double d = x(i, j) - mean[j];
                var[j] += d * d;
            }
        for (int j = 0; j < p; ++j) {
            const double sd = std::sqrt(var[j] / idx.size());
            inv_std[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
        }
    }

    DenseMatrix transform(const DenseMatrix& x, std::span<const int> idx) const {
        DenseMatrix out(static_cast<int>(idx.size()), x.cols());
        for (size_t r = 0; r < idx.size(); ++r)
            for (int j = 0; j < x.cols(); ++j)
                out(static_cast<int>(r), j) = (x(idx[r], j) - mean[j]) * inv_std[j];
        return out;
    }
};

std::vector<double> gather(std::span<const double> y, std::span<const int> idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(y[i]);
    return out;
}

// Mean validation MSE of the best grid point over kf folds of the given rows.
double pick_alpha(const DenseMatrix& x_std, std::span<const double> y,
                  const std::vector<double>& grid, int kf, uint64_t seed) {
    const int m = x_std.rows();
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    double best_a = grid.front();
    double best_mse = std::numeric_limits<double>::infinity();
    for (double a : grid) {
        double mse_sum = 0.0;
        long count = 0;
        for (int f = 0; f < kf; ++f) {
            const int lo = static_cast<int>(static_cast<long>(f) * m / kf);
            const int hi = static_cast<int>(static_cast<long>(f + 1) * m / kf);
            if (hi - lo == 0 || m - (hi - lo) == 0) continue;
            std::vector<int> tr, va;
            for (int i = 0; i < m; ++i)
                (i >= lo && i < hi ? va : tr).push_back(order[i]);
            DenseMatrix xtr(static_cast<int>(tr.size()), x_std.cols());
            std::vector<double> ytr;
            ytr.reserve(tr.size());
            for (size_t r = 0; r < tr.size(); ++r) {
                std::copy(x_std.row(tr[r]), x_std.row(tr[r]) + x_std.cols(),
                          xtr.row(static_cast<int>(r)));
                ytr.push_back(y[tr[r]]);
            }
            const LassoFit fit = fit_lasso(xtr, ytr, a);
            for (int i : va) {
                double pred = fit.intercept;
                for (int j = 0; j < x_std.cols(); ++j) pred += x_std(i, j) * fit.w[j];
                mse_sum += (y[i] - pred) * (y[i] - pred);
                ++count;
            }
        }
        const double mse = count > 0 ? mse_sum / count : std::numeric_limits<double>::infinity();
        if (mse < best_mse) {
            best_mse = mse;
            best_a = a;
        }
    }
    return best_a;
}

}  // namespace

RegressionReport lasso_cv(const DenseMatrix& e, std::span<const double> y, int folds,
                          uint64_t seed) {
    const int n = e.rows();
    if (static_cast<int>(y.size()) != n)
        throw DimensionError("lasso_cv: " + std::to_string(y.size()) + " targets for " +
                             std::to_string(n) + " rows");
    if (n < folds)
        throw DataError("lasso_cv: need at least " + std::to_string(folds) + " samples, got " +
                        std::to_string(n));
    {
        const double m = std::accumulate(y.begin(), y.end(), 0.0) / n;
        double var = 0.0;
        for (double v : y) var += (v - m) * (v - m);
        if (var <= 0.0) throw DataError("lasso_cv: constant target, R^2 undefined");
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(derive_seed(seed, 0x1A550u));
    std::shuffle(order.begin(), order.end(), rng);

    RegressionReport report;
    for (int f = 0; f < folds; ++f) {
        const int lo = static_cast<int>(static_cast<long>(f) * n / folds);
        const int hi = static_cast<int>(static_cast<long>(f + 1) * n / folds);
        std::vector<int> test(order.begin() + lo, order.begin() + hi);
        std::vector<int> trainset;
        trainset.reserve(n - test.size());
        for (int i = 0; i < n; ++i)
            if (i < lo || i >= hi) trainset.push_back(order[i]);

        Scaler scaler;
        scaler.fit(e, trainset);
        const DenseMatrix xtr = scaler.transform(e, trainset);
        const DenseMatrix xte = scaler.transform(e, test);
        const std::vector<double> ytr = gather(y, trainset);
        const std::vector<double> yte = gather(y, test);

        const double ymean = std::accumulate(ytr.begin(), ytr.end(), 0.0) / ytr.size();
        double a_max = 0.0;
        for (int j = 0; j < xtr.cols(); ++j) {
            double dot = 0.0;
            for (int i = 0; i < xtr.rows(); ++i) dot += xtr(i, j) * (ytr[i] - ymean);
            a_max = std::max(a_max, std::fabs(dot) / xtr.rows());
        }
        if (a_max <= 0.0) a_max = 1e-12;
        std::vector<double> grid(20);
        for (int i = 0; i < 20; ++i)
            grid[i] = a_max * std::pow(10.0, -3.0 + 4.0 * i / 19.0);

        const double best_a = pick_alpha(xtr, ytr, grid, 3, derive_seed(seed, 0x13Fu, f));
        const LassoFit fit = fit_lasso(xtr, ytr, best_a);

        double mae = 0.0, mse = 0.0, ss_res = 0.0, ss_tot = 0.0;
        const double yte_mean =
            std::accumulate(yte.begin(), yte.end(), 0.0) / yte.size();
        for (size_t i = 0; i < test.size(); ++i) {
            double pred = fit.intercept;
            for (int j = 0; j < xte.cols(); ++j) pred += xte(static_cast<int>(i), j) * fit.w[j];
            const double err = yte[i] - pred;
            mae += std::fabs(err);
            mse += err * err;
            ss_res += err * err;
            ss_tot += (yte[i] - yte_mean) * (yte[i] - yte_mean);
        }
        if (ss_tot <= 0.0) throw DataError("lasso_cv: constant target in fold, R^2 undefined");
        report.mae.runs.push_back(mae / test.size());
        report.rmse.runs.push_back(std::sqrt(mse / test.size()));
        report.r2.runs.push_back(1.0 - ss_res / ss_tot);
    }
    return report;
}

RegressionReport evaluate_popularity(const DenseMatrix& e, std::span<const double> checkins,
                                     uint64_t seed) {
    return lasso_cv(e, checkins, 5, seed);
}

// ---------------------------------------------------------------------------
// Reports

namespace {

nlohmann::json metric_json(const MetricSummary& m) {
    return {{"runs", m.runs}, {"mean", m.mean()}, {"std", m.stddev()}};
}

void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << j.dump(2) << '\n';
}

}  // namespace

void write_cluster_report(const ClusterReport& r, const std::string& task,
                          const std::string& path) {
    nlohmann::json j{{"task", task},
                     {"k", r.k},
                     {"metrics",
                      {{"nmi", metric_json(r.nmi)},
                       {"ari", metric_json(r.ari)},
                       {"f_measure", metric_json(r.f)}}}};
    write_json(j, path);
}

void write_regression_report(const RegressionReport& r, const std::string& task,
                             const std::string& path) {
    nlohmann::json j{{"task", task},
                     {"metrics",
                      {{"mae", metric_json(r.mae)},
                       {"rmse", metric_json(r.rmse)},
                       {"r2", metric_json(r.r2)}}}};
    write_json(j, path);
}

void write_cluster_labels(std::span<const int> labels, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << "region,cluster\n";
    for (size_t i = 0; i < labels.size(); ++i) f << i << ',' << labels[i] << '\n';
}

}  // namespace recp::eval
