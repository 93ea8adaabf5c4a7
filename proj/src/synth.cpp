#include "recp/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "recp/errors.hpp"

namespace recp::synth {

namespace {

void validate(const CitySpec& s) {
    if (s.n < 1 || s.g < 1 || s.g > s.n)
        throw ConfigError("synth: need 1 <= functions <= regions, got g=" + std::to_string(s.g) +
                          ", n=" + std::to_string(s.n));
    if (s.categories < s.g)
        throw ConfigError("synth: need categories >= functions, got F=" +
                          std::to_string(s.categories));
    if (s.intervals < 1) throw ConfigError("synth: intervals must be >= 1");
    if (s.trips_total < 0) throw ConfigError("synth: trips_total must be >= 0");
    if (s.overlap < 0.0 || s.overlap > 1.0)
        throw ConfigError("synth: overlap must be in [0,1], got " + std::to_string(s.overlap));
    if (s.noise < 0.0) throw ConfigError("synth: noise must be >= 0");
}

int sample_discrete(const std::vector<double>& probs, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (x < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace

GroundTruth make_ground_truth(const CitySpec& s) {
    validate(s);
    GroundTruth t;
    t.labels.resize(s.n);
    for (int i = 0; i < s.n; ++i) t.labels[i] = i % s.g;

    // POI profile: each function owns a contiguous category block, blended
    // toward uniform by the overlap knob.
    const int block = s.categories / s.g;
    t.poi_profiles.assign(s.g, std::vector<double>(s.categories, 0.0));
    for (int f = 0; f < s.g; ++f) {
        const int b0 = f * block;
        const int b1 = (f == s.g - 1) ? s.categories : b0 + block;
        for (int c = 0; c < s.categories; ++c) {
            const double own = (c >= b0 && c < b1) ? 1.0 / (b1 - b0) : 0.0;
            t.poi_profiles[f][c] = (1.0 - s.overlap) * own + s.overlap / s.categories;
        }
    }

    // Destination-function preference: each function routes to the next one.
    t.dest_function.assign(s.g, std::vector<double>(s.g, 0.0));
    for (int f = 0; f < s.g; ++f)
        for (int d = 0; d < s.g; ++d) {
            const double own = (d == (f + 1) % s.g) ? 1.0 : 0.0;
            t.dest_function[f][d] = (1.0 - s.overlap) * own + s.overlap / s.g;
        }

    // Hour profile: a circular Gaussian bump at a function-specific hour.
    t.hour_profiles.assign(s.g, std::vector<double>(s.intervals, 0.0));
    const double sigma = 2.0;
    for (int f = 0; f < s.g; ++f) {
        const double center = (f + 0.5) * s.intervals / s.g;
        double total = 0.0;
        for (int h = 0; h < s.intervals; ++h) {
            double d = std::fabs(h + 0.5 - center);
            d = std::min(d, s.intervals - d);
            t.hour_profiles[f][h] = std::exp(-d * d / (2.0 * sigma * sigma));
            total += t.hour_profiles[f][h];
        }
        for (int h = 0; h < s.intervals; ++h) {
            const double own = t.hour_profiles[f][h] / total;
            t.hour_profiles[f][h] = (1.0 - s.overlap) * own + s.overlap / s.intervals;
        }
    }

    t.popularity_weights.resize(s.g);
    for (int f = 0; f < s.g; ++f)
        t.popularity_weights[f] = s.g == 1 ? 1.0 : 0.5 + 1.5 * f / (s.g - 1);
    return t;
}

City generate_city(const CitySpec& s) {
    City city;
    city.truth = make_ground_truth(s);
    Rng rng = make_rng(derive_seed(s.seed, 0xC17Eu));

    std::vector<std::vector<int>> regions_of(s.g);
    for (int i = 0; i < s.n; ++i) regions_of[city.truth.labels[i]].push_back(i);

    // POIs: per-region totals ~ Poisson(poi_mean), categories from the
    // region's function profile.
    std::poisson_distribution<int> poi_total_dist(s.poi_mean);
    std::vector<int> poi_totals(s.n, 0);
    for (int i = 0; i < s.n; ++i) {
        const int total = poi_total_dist(rng);
        poi_totals[i] = total;
        const auto& profile = city.truth.poi_profiles[city.truth.labels[i]];
        for (int p = 0; p < total; ++p)
            city.pois.push_back({i, sample_discrete(profile, rng)});
    }

    // Trips: uniform origin; destination function and hour from the origin
    // function's OD profile; uniform destination region of that function.
    std::uniform_int_distribution<int> origin_dist(0, s.n - 1);
    city.trips.reserve(s.trips_total);
    for (long k = 0; k < s.trips_total; ++k) {
        const int origin = origin_dist(rng);
        const int f = city.truth.labels[origin];
        const int df = sample_discrete(city.truth.dest_function[f], rng);
        const int hour = sample_discrete(city.truth.hour_profiles[f], rng);
        const auto& cand = regions_of[df];
        std::uniform_int_distribution<int> dd(0, static_cast<int>(cand.size()) - 1);
        city.trips.push_back({origin, cand[dd(rng)], hour});
    }

    // Check-ins: popularity weight x noisy multiplier x POI mass.
    std::normal_distribution<double> noise_dist(0.0, 1.0);
    city.checkins.resize(s.n);
    for (int i = 0; i < s.n; ++i) {
        const double w = city.truth.popularity_weights[city.truth.labels[i]];
        const double mult = 1.0 + s.noise * noise_dist(rng);
        const double v = w * mult * poi_totals[i];
        city.checkins[i] = static_cast<long long>(std::llround(std::max(0.0, v)));
    }
    return city;
}

void write_city_csvs(const City& city, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream f(fs::path(dir) / "pois.csv");
        f << "region,category\n";
        for (const auto& r : city.pois) f << r.region << ',' << r.category << '\n';
    }
    {
        std::ofstream f(fs::path(dir) / "trips.csv");
        f << "origin,dest,hour\n";
        for (const auto& r : city.trips) f << r.origin << ',' << r.dest << ',' << r.hour << '\n';
    }
    {
        std::ofstream f(fs::path(dir) / "checkins.csv");
        f << "region,count\n";
        for (size_t i = 0; i < city.checkins.size(); ++i) f << i << ',' << city.checkins[i] << '\n';
    }
    {
        std::ofstream f(fs::path(dir) / "labels.csv");
        f << "region,function\n";
        for (size_t i = 0; i < city.truth.labels.size(); ++i)
            f << i << ',' << city.truth.labels[i] << '\n';
    }
}

}  // namespace recp::synth
