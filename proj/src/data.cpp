#include "recp/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "recp/errors.hpp"

namespace recp::data {

namespace {

std::string trim(std::string s) {
    const char* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

bool parse_int(const std::string& s, int& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size();
}

// Streams data rows of a CSV with the given header, calling fn(fields,
// line_no) per well-formed row. Returns the number of well-formed rows.
long stream_csv(const std::string& path, const std::string& header, int ncols,
                const std::function<bool(const std::vector<std::string>&, long)>& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    long line_no = 0;
    bool header_seen = false;
    long good = 0, bad = 0, total = 0;
    long first_bad = -1;
    std::vector<std::string> fields;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
            line.erase(0, 3);  // UTF-8 BOM
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header_seen) {
            if (t != header)
                throw DataError(path + ": header mismatch, expected '" + header + "' got '" + t +
                                "'");
            header_seen = true;
            continue;
        }
        ++total;
        fields.clear();
        size_t start = 0;
        while (true) {
            const size_t pos = t.find(',', start);
            fields.push_back(t.substr(start, pos == std::string::npos ? pos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        bool ok = static_cast<int>(fields.size()) == ncols;
        if (ok) ok = fn(fields, line_no);
        if (!ok) {
            ++bad;
            if (first_bad < 0) first_bad = line_no;
        } else {
            ++good;
        }
    }
    if (!header_seen) throw DataError(path + ": missing header '" + header + "'");
    if (bad > 0) {
        const long allowed = std::max<long>(1, total / 100);
        if (bad > allowed)
            throw DataError(path + ": " + std::to_string(bad) + " of " + std::to_string(total) +
                            " data lines malformed (first at line " + std::to_string(first_bad) +
                            "), above the tolerated " + std::to_string(allowed));
        std::fprintf(stderr, "[recp] warning: %s: skipped %ld malformed line(s), first at line %ld\n",
                     path.c_str(), bad, first_bad);
    }
    return good;
}

}  // namespace

void for_each_trip(const std::string& path,
                   const std::function<void(const TripRecord&, long)>& fn) {
    stream_csv(path, "origin,dest,hour", 3, [&](const std::vector<std::string>& f, long ln) {
        TripRecord r;
        if (!parse_int(f[0], r.origin) || !parse_int(f[1], r.dest) || !parse_int(f[2], r.hour))
            return false;
        if (r.origin < 0 || r.dest < 0 || r.hour < 0) return false;
        fn(r, ln);
        return true;
    });
}

void for_each_poi(const std::string& path, const std::function<void(const PoiRecord&, long)>& fn) {
    stream_csv(path, "region,category", 2, [&](const std::vector<std::string>& f, long ln) {
        PoiRecord r;
        if (!parse_int(f[0], r.region) || !parse_int(f[1], r.category)) return false;
        if (r.region < 0 || r.category < 0) return false;
        fn(r, ln);
        return true;
    });
}

std::vector<TripRecord> load_csv_trips(const std::string& path) {
    std::vector<TripRecord> out;
    for_each_trip(path, [&](const TripRecord& r, long) { out.push_back(r); });
    return out;
}

std::vector<PoiRecord> load_csv_pois(const std::string& path) {
    std::vector<PoiRecord> out;
    for_each_poi(path, [&](const PoiRecord& r, long) { out.push_back(r); });
    return out;
}

CheckinVector load_csv_checkins(const std::string& path, int n) {
    CheckinVector c;
    c.values.assign(n, 0.0);
    stream_csv(path, "region,count", 2, [&](const std::vector<std::string>& f, long ln) {
        int region, count;
        if (!parse_int(f[0], region) || !parse_int(f[1], count)) return false;
        if (count < 0) return false;
        if (region < 0 || region >= n)
            throw DataError(path + " line " + std::to_string(ln) + ": region " +
                            std::to_string(region) + " outside [0," + std::to_string(n) + ")");
        c.values[region] += count;
        return true;
    });
    return c;
}

std::vector<int> load_csv_labels(const std::string& path, int n) {
    std::vector<int> labels(n, -1);
    // generated cities write region,function; real ground truth files use
    // region,district
    const char* headers[] = {"region,function", "region,district", "region,label",
                             "region,cluster"};
    std::string last_err;
    for (const char* h : headers) {
        try {
            std::fill(labels.begin(), labels.end(), -1);
            stream_csv(path, h, 2, [&](const std::vector<std::string>& f, long ln) {
                int region, label;
                if (!parse_int(f[0], region) || !parse_int(f[1], label)) return false;
                if (region < 0 || region >= n)
                    throw DataError(path + " line " + std::to_string(ln) + ": region " +
                                    std::to_string(region) + " outside [0," + std::to_string(n) +
                                    ")");
                labels[region] = label;
                return true;
            });
            for (int i = 0; i < n; ++i)
                if (labels[i] < 0)
                    throw DataError(path + ": no label for region " + std::to_string(i));
            return labels;
        } catch (const DataError& e) {
            last_err = e.what();
            if (std::string(e.what()).find("header mismatch") == std::string::npos) throw;
        }
    }
    throw DataError(last_err);
}

AttributeMatrix build_attributes(const std::vector<PoiRecord>& pois, int n, int categories) {
    AttributeMatrix a;
    a.values = DenseMatrix(n, categories);
    for (size_t i = 0; i < pois.size(); ++i) {
        const PoiRecord& r = pois[i];
        if (r.region < 0 || r.region >= n || r.category < 0 || r.category >= categories)
            throw DataError("poi record " + std::to_string(i) + ": (region=" +
                            std::to_string(r.region) + ", category=" + std::to_string(r.category) +
                            ") outside " + std::to_string(n) + "x" + std::to_string(categories));
        a.values(r.region, r.category) += 1.0;
    }
    return a;
}

std::pair<FlowMatrix, FlowMatrix> build_flows(const std::vector<TripRecord>& trips, int n,
                                              int intervals) {
    FlowMatrix out, in;
    out.direction = FlowMatrix::Direction::Outflow;
    in.direction = FlowMatrix::Direction::Inflow;
    out.intervals = in.intervals = intervals;
    out.values = DenseMatrix(n, n * intervals);
    in.values = DenseMatrix(n, n * intervals);
    for (size_t i = 0; i < trips.size(); ++i) {
        const TripRecord& r = trips[i];
        if (r.origin < 0 || r.origin >= n || r.dest < 0 || r.dest >= n || r.hour < 0 ||
            r.hour >= intervals)
            throw DataError("trip record " + std::to_string(i) + ": (origin=" +
                            std::to_string(r.origin) + ", dest=" + std::to_string(r.dest) +
                            ", hour=" + std::to_string(r.hour) + ") outside n=" +
                            std::to_string(n) + ", intervals=" + std::to_string(intervals));
        out.values(r.origin, r.dest * intervals + r.hour) += 1.0;
        in.values(r.dest, r.origin * intervals + r.hour) += 1.0;
    }
    return {std::move(out), std::move(in)};
}

AttributeMatrix build_attributes_csv(const std::string& path, int n, int categories) {
    AttributeMatrix a;
    a.values = DenseMatrix(n, categories);
    for_each_poi(path, [&](const PoiRecord& r, long ln) {
        if (r.region >= n || r.category >= categories)
            throw DataError(path + " line " + std::to_string(ln) + ": (region=" +
                            std::to_string(r.region) + ", category=" + std::to_string(r.category) +
                            ") outside " + std::to_string(n) + "x" + std::to_string(categories));
        a.values(r.region, r.category) += 1.0;
    });
    return a;
}

std::pair<FlowMatrix, FlowMatrix> build_flows_csv(const std::string& path, int n, int intervals) {
    FlowMatrix out, in;
    out.direction = FlowMatrix::Direction::Outflow;
    in.direction = FlowMatrix::Direction::Inflow;
    out.intervals = in.intervals = intervals;
    out.values = DenseMatrix(n, n * intervals);
    in.values = DenseMatrix(n, n * intervals);
    for_each_trip(path, [&](const TripRecord& r, long ln) {
        if (r.origin >= n || r.dest >= n || r.hour >= intervals)
            throw DataError(path + " line " + std::to_string(ln) + ": (origin=" +
                            std::to_string(r.origin) + ", dest=" + std::to_string(r.dest) +
                            ", hour=" + std::to_string(r.hour) + ") outside n=" +
                            std::to_string(n) + ", intervals=" + std::to_string(intervals));
        out.values(r.origin, r.dest * intervals + r.hour) += 1.0;
        in.values(r.dest, r.origin * intervals + r.hour) += 1.0;
    });
    return {std::move(out), std::move(in)};
}

void Preprocessor::fit(const DenseMatrix& raw) {
    const int n = raw.rows(), c = raw.cols();
    mean = DenseMatrix(1, c);
    inv_std = DenseMatrix(1, c);
    if (n == 0) return;
#pragma omp parallel for schedule(static)
    for (int j = 0; j < c; ++j) {
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += std::log1p(raw(i, j));
        mu /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = std::log1p(raw(i, j)) - mu;
            var += d * d;
        }
        const double sd = std::sqrt(var / n);
        mean(0, j) = mu;
        // columns with std below the floor are treated as constant and zeroed
        inv_std(0, j) = sd < 1e-8 ? 0.0 : 1.0 / sd;
    }
}

DenseMatrix Preprocessor::transform(const DenseMatrix& raw) const {
    if (raw.cols() != mean.cols())
        throw DimensionError("Preprocessor: fitted on " + std::to_string(mean.cols()) +
                             " columns, got " + raw.shape_str());
    const int n = raw.rows(), c = raw.cols();
    DenseMatrix out(n, c);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
            out(i, j) = (std::log1p(raw(i, j)) - mean(0, j)) * inv_std(0, j);
    return out;
}

void Preprocessor::transform_inplace(DenseMatrix& m) const {
    if (m.cols() != mean.cols())
        throw DimensionError("Preprocessor: fitted on " + std::to_string(mean.cols()) +
                             " columns, got " + m.shape_str());
    const int n = m.rows(), c = m.cols();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
            m(i, j) = (std::log1p(m(i, j)) - mean(0, j)) * inv_std(0, j);
}

DenseMatrix preprocess(const DenseMatrix& raw) {
    Preprocessor p;
    p.fit(raw);
    return p.transform(raw);
}

}  // namespace recp::data
