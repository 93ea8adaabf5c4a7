#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "recp/errors.hpp"

namespace recp {

// Dense row-major matrix of doubles. The one value type every numeric
// routine in the project operates on.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
    }

    static DenseMatrix zeros(int rows, int cols) { return DenseMatrix(rows, cols, 0.0); }

    static DenseMatrix identity(int n) {
        DenseMatrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return v_.size(); }

    double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * cols_ + j]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double* row(int i) { return v_.data() + static_cast<size_t>(i) * cols_; }
    const double* row(int i) const { return v_.data() + static_cast<size_t>(i) * cols_; }

    bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : v_) m = std::max(m, std::fabs(x));
        return m;
    }

    bool operator==(const DenseMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
}

}  // namespace recp
