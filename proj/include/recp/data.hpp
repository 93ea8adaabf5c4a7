#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "recp/matrix.hpp"

namespace recp::data {

// One trip pre-assigned to region indices; hour is the time interval index.
struct TripRecord {
    int origin = 0;
    int dest = 0;
    int hour = 0;

    bool operator==(const TripRecord&) const = default;
};

struct PoiRecord {
    int region = 0;
    int category = 0;

    bool operator==(const PoiRecord&) const = default;
};

// n x F nonnegative POI category counts.
struct AttributeMatrix {
    DenseMatrix values;
};

// n x (n * intervals) trip counts; entry (i, j*intervals + t) is the count
// for counterpart region j at interval t.
struct FlowMatrix {
    enum class Direction { Outflow, Inflow };
    Direction direction = Direction::Outflow;
    int intervals = 0;
    DenseMatrix values;
};

// Aggregated check-in counts per region.
struct CheckinVector {
    std::vector<double> values;
};

// --- CSV loaders ------------------------------------------------------------
// All files are UTF-8 comma-separated with an exact header line; lines
// starting with '#' are skipped. Malformed data lines are counted and
// reported; parsing fails if more than max(1, 1% of data lines) are bad.

void for_each_trip(const std::string& path,
                   const std::function<void(const TripRecord&, long line_no)>& fn);
void for_each_poi(const std::string& path,
                  const std::function<void(const PoiRecord&, long line_no)>& fn);

std::vector<TripRecord> load_csv_trips(const std::string& path);
std::vector<PoiRecord> load_csv_pois(const std::string& path);
// Length n; regions absent from the file stay 0. Duplicate regions accumulate.
CheckinVector load_csv_checkins(const std::string& path, int n);
// regions.csv / labels.csv: two integer columns, second column is the label.
std::vector<int> load_csv_labels(const std::string& path, int n);

// --- Feature construction ---------------------------------------------------

AttributeMatrix build_attributes(const std::vector<PoiRecord>& pois, int n, int categories);
std::pair<FlowMatrix, FlowMatrix> build_flows(const std::vector<TripRecord>& trips, int n,
                                              int intervals);

// Streaming variants: accumulate counts in one pass over the file so the
// record list never materializes; index errors carry the file line number.
AttributeMatrix build_attributes_csv(const std::string& path, int n, int categories);
std::pair<FlowMatrix, FlowMatrix> build_flows_csv(const std::string& path, int n, int intervals);

// --- Preprocessing ----------------------------------------------------------
// log(1+x) then per-column standardization with std floor 1e-8; constant
// columns map to all-zero. Fit once on the raw view matrix, then apply the
// same affine transform to any augmented copy of it.
struct Preprocessor {
    DenseMatrix mean;     // 1 x c, of log1p-transformed data
    DenseMatrix inv_std;  // 1 x c

    void fit(const DenseMatrix& raw);
    DenseMatrix transform(const DenseMatrix& raw) const;
    void transform_inplace(DenseMatrix& m) const;
};

DenseMatrix preprocess(const DenseMatrix& raw);

}  // namespace recp::data
