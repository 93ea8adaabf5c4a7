#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recp/matrix.hpp"

namespace recp::eval {

struct KMeansResult {
    std::vector<int> labels;
    double inertia = 0.0;
};

// k-means++ seeding, Lloyd iterations, best-inertia restart kept. Empty
// clusters are reseeded from the point farthest from its assigned centroid.
KMeansResult kmeans(const DenseMatrix& e, int k, int restarts = 10, int max_iter = 100,
                    uint64_t seed = 0);

// Clustering agreement metrics. Label values may be arbitrary integers; all
// three are invariant to relabeling either side.
// NMI: I(a;b)/sqrt(H(a)H(b)); two zero-entropy sides -> 1, one -> 0.
double nmi(std::span<const int> a, std::span<const int> b);
// Adjusted Rand from pair counts; zero denominator -> 1.
double ari(std::span<const int> a, std::span<const int> b);
// Pairwise F1 over same-cluster pairs; a is the reference labeling.
double f_measure(std::span<const int> a, std::span<const int> b);

struct MetricSummary {
    std::vector<double> runs;
    double mean() const;
    double stddev() const;  // population
};

struct ClusterReport {
    int k = 0;
    MetricSummary nmi, ari, f;
};

struct RegressionReport {
    MetricSummary mae, rmse, r2;
};

ClusterReport evaluate_clustering(const DenseMatrix& e, std::span<const int> truth, int k,
                                  int runs = 10, uint64_t seed = 0);

struct LassoFit {
    std::vector<double> w;
    double intercept = 0.0;
    double objective = 0.0;
    int sweeps = 0;
};

// Cyclic coordinate descent on (1/2m)||y - Xw - b||^2 + a||w||_1 with an
// exact intercept update per sweep. X is used as given. objective_trace, when
// set, records the objective after every sweep.
LassoFit fit_lasso(const DenseMatrix& x, std::span<const double> y, double a,
                   int max_sweeps = 1000, double tol = 1e-9,
                   std::vector<double>* objective_trace = nullptr);
double lasso_objective(const DenseMatrix& x, std::span<const double> y,
                       std::span<const double> w, double b, double a);

// Per outer fold: standardize on the train split, pick the regularization
// strength by inner 3-fold CV over a 20-point log grid spanning
// [1e-3, 1e+1] * a_max with a_max = max|X^T (y - mean(y))| / m, refit, and
// score the held-out fold. Throws DataError for a constant target.
RegressionReport lasso_cv(const DenseMatrix& e, std::span<const double> y, int folds = 5,
                          uint64_t seed = 0);

RegressionReport evaluate_popularity(const DenseMatrix& e, std::span<const double> checkins,
                                     uint64_t seed = 0);

// report.json: {"task":..., "metrics": {name: {"runs":[...], "mean":..., "std":...}}}
void write_cluster_report(const ClusterReport& r, const std::string& task,
                          const std::string& path);
void write_regression_report(const RegressionReport& r, const std::string& task,
                             const std::string& path);
void write_cluster_labels(std::span<const int> labels, const std::string& path);

}  // namespace recp::eval
