#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "recp/data.hpp"
#include "test_helpers.hpp"

using namespace recp;
using namespace recp::data;
using recp::testing::TempDir;
using recp::testing::write_file;

TEST_CASE("build_attributes counts categories per region") {
    const AttributeMatrix empty = build_attributes({}, 3, 4);
    CHECK(empty.values.max_abs() == 0.0);

    const AttributeMatrix a = build_attributes({{0, 2}, {0, 2}, {1, 0}}, 2, 3);
    CHECK(a.values(0, 0) == 0.0);
    CHECK(a.values(0, 2) == 2.0);
    CHECK(a.values(1, 0) == 1.0);
    CHECK(a.values(1, 1) == 0.0);
}

TEST_CASE("build_attributes column sums match independent per-category counts") {
    Rng rng = make_rng(101);
    std::uniform_int_distribution<int> region(0, 49), category(0, 9);
    std::vector<PoiRecord> records;
    std::vector<long> counts(10, 0);
    for (int i = 0; i < 10000; ++i) {
        const PoiRecord r{region(rng), category(rng)};
        records.push_back(r);
        ++counts[r.category];
    }
    const AttributeMatrix a = build_attributes(records, 50, 10);
    for (int c = 0; c < 10; ++c) {
        double col = 0.0;
        for (int i = 0; i < 50; ++i) col += a.values(i, c);
        CHECK(col == static_cast<double>(counts[c]));
    }
}

TEST_CASE("build_attributes is permutation-equivariant in region indices") {
    Rng rng = make_rng(102);
    std::uniform_int_distribution<int> region(0, 11), category(0, 5);
    std::vector<PoiRecord> records;
    for (int i = 0; i < 300; ++i) records.push_back({region(rng), category(rng)});

    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<PoiRecord> permuted;
    for (const PoiRecord& r : records) permuted.push_back({perm[r.region], r.category});

    const AttributeMatrix a = build_attributes(records, 12, 6);
    const AttributeMatrix b = build_attributes(permuted, 12, 6);
    for (int i = 0; i < 12; ++i)
        for (int c = 0; c < 6; ++c) CHECK(b.values(perm[i], c) == a.values(i, c));
}

TEST_CASE("build_attributes rejects out-of-range records") {
    CHECK_THROWS_AS(build_attributes({{5, 0}}, 3, 2), DataError);
    CHECK_THROWS_AS(build_attributes({{0, 7}}, 3, 2), DataError);
}

TEST_CASE("build_flows places counts in the counterpart-region block layout") {
    const auto [s, d] = build_flows({{0, 1, 0}, {0, 1, 0}}, 2, 2);
    CHECK(s.values(0, 1 * 2 + 0) == 2.0);
    CHECK(d.values(1, 0 * 2 + 0) == 2.0);
    double total_s = 0.0, total_d = 0.0;
    for (size_t i = 0; i < s.values.size(); ++i) total_s += s.values.data()[i];
    for (size_t i = 0; i < d.values.size(); ++i) total_d += d.values.data()[i];
    CHECK(total_s == 2.0);
    CHECK(total_d == 2.0);

    const auto [es, ed] = build_flows({}, 2, 2);
    CHECK(es.values.max_abs() == 0.0);
    CHECK(ed.values.max_abs() == 0.0);
}

TEST_CASE("build_flows conserves trips and mirrors outflow/inflow blocks") {
    Rng rng = make_rng(103);
    std::uniform_int_distribution<int> region(0, 19), hour(0, 5);
    std::vector<TripRecord> trips;
    std::map<std::tuple<int, int, int>, int> recount;
    for (int i = 0; i < 1000; ++i) {
        const TripRecord t{region(rng), region(rng), hour(rng)};
        trips.push_back(t);
        ++recount[{t.origin, t.dest, t.hour}];
    }
    const auto [s, d] = build_flows(trips, 20, 6);

    double total_s = 0.0, total_d = 0.0;
    for (size_t i = 0; i < s.values.size(); ++i) {
        total_s += s.values.data()[i];
        total_d += d.values.data()[i];
    }
    CHECK(total_s == 1000.0);
    CHECK(total_d == 1000.0);

    for (const auto& [key, count] : recount) {
        const auto [o, dst, t] = key;
        CHECK(s.values(o, dst * 6 + t) == static_cast<double>(count));
    }
    // D is the origin/destination transpose of S in the block sense
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j)
            for (int t = 0; t < 6; ++t) CHECK(d.values(i, j * 6 + t) == s.values(j, i * 6 + t));
}

TEST_CASE("preprocess: constant columns map to zero, analytic column standardizes") {
    const DenseMatrix zeros(4, 3);
    CHECK(preprocess(zeros).max_abs() == 0.0);

    DenseMatrix col(2, 1);
    col(0, 0) = 0.0;
    col(1, 0) = std::exp(1.0) - 1.0;  // log1p -> {0, 1}
    const DenseMatrix out = preprocess(col);
    CHECK(out(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(out(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("preprocess output columns are standardized and never NaN") {
    Rng rng = make_rng(104);
    DenseMatrix raw = recp::testing::random_matrix(40, 8, rng, 0.0, 50.0);
    for (int i = 0; i < raw.rows(); ++i) raw(i, 7) = 3.0;  // constant column
    const DenseMatrix out = preprocess(raw);
    CHECK(out.all_finite());
    CHECK(out.rows() == raw.rows());
    CHECK(out.cols() == raw.cols());
    for (int j = 0; j < 7; ++j) {
        double mean = 0.0;
        for (int i = 0; i < out.rows(); ++i) mean += out(i, j);
        mean /= out.rows();
        double var = 0.0;
        for (int i = 0; i < out.rows(); ++i) var += (out(i, j) - mean) * (out(i, j) - mean);
        const double sd = std::sqrt(var / out.rows());
        CHECK(std::fabs(mean) < 1e-9);
        CHECK(std::fabs(sd - 1.0) < 1e-6);
    }
    for (int i = 0; i < out.rows(); ++i) CHECK(out(i, 7) == 0.0);
}

TEST_CASE("csv loaders: empty file, malformed lines, hard failures") {
    TempDir dir("data");

    write_file(dir.file("empty.csv"), "origin,dest,hour\n");
    CHECK(load_csv_trips(dir.file("empty.csv")).empty());

    // one bad line out of ten data lines parses with a warning
    std::string ten = "origin,dest,hour\n";
    for (int i = 0; i < 9; ++i) ten += "0,1," + std::to_string(i % 3) + "\n";
    ten += "0,oops,1\n";
    write_file(dir.file("ten.csv"), ten);
    CHECK(load_csv_trips(dir.file("ten.csv")).size() == 9);

    // 50 bad lines out of 1000 exceeds the 1% threshold
    std::string many = "origin,dest,hour\n";
    for (int i = 0; i < 950; ++i) many += "1,2,3\n";
    for (int i = 0; i < 50; ++i) many += "bad,line\n";
    write_file(dir.file("many.csv"), many);
    CHECK_THROWS_AS(load_csv_trips(dir.file("many.csv")), DataError);

    CHECK_THROWS_AS(load_csv_trips(dir.file("missing.csv")), DataError);

    write_file(dir.file("wrong.csv"), "a,b,c\n1,2,3\n");
    CHECK_THROWS_AS(load_csv_trips(dir.file("wrong.csv")), DataError);

    write_file(dir.file("comments.csv"), "# a comment\norigin,dest,hour\n# another\n1,0,2\n");
    const auto trips = load_csv_trips(dir.file("comments.csv"));
    REQUIRE(trips.size() == 1);
    CHECK(trips[0].origin == 1);
    CHECK(trips[0].hour == 2);

    write_file(dir.file("pois.csv"), "region,category\n0,1\n0,1\n2,0\n");
    const auto pois = load_csv_pois(dir.file("pois.csv"));
    CHECK(pois.size() == 3);

    write_file(dir.file("checkins.csv"), "region,count\n0,5\n2,7\n");
    const CheckinVector c = load_csv_checkins(dir.file("checkins.csv"), 3);
    CHECK(c.values == std::vector<double>{5.0, 0.0, 7.0});

    write_file(dir.file("labels.csv"), "region,district\n0,3\n1,3\n2,9\n");
    CHECK(load_csv_labels(dir.file("labels.csv"), 3) == std::vector<int>{3, 3, 9});
}

namespace {

long vm_hwm_kb() {
    std::ifstream f("/proc/self/status");
    std::string line;
    while (std::getline(f, line))
        if (line.rfind("VmHWM:", 0) == 0) return std::stol(line.substr(6));
    return -1;
}

}  // namespace

TEST_CASE("trip streaming keeps memory flat on a large file") {
    TempDir dir("bigcsv");
    const std::string path = dir.file("big_trips.csv");
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        REQUIRE(f != nullptr);
        std::fprintf(f, "origin,dest,hour\n");
        for (int i = 0; i < 2000000; ++i)
            std::fprintf(f, "%d,%d,%d\n", i % 80, (i * 7) % 80, i % 24);
        std::fclose(f);
    }
    const long before = vm_hwm_kb();
    long count = 0;
    DenseMatrix sums(80, 24);
    for_each_trip(path, [&](const TripRecord& t, long) {
        ++count;
        sums(t.origin, t.hour) += 1.0;
    });
    const long after = vm_hwm_kb();
    CHECK(count == 2000000);
    if (before > 0 && after > 0) CHECK(after - before < 16 * 1024);  // < 16 MB growth
}
