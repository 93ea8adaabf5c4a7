#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recp/data.hpp"
#include "recp/rng.hpp"

namespace recp::synth {

// A planted-structure city: every region belongs to one latent function that
// drives its POI profile, its trip destinations and hours, and its
// popularity, so the attribute and mobility views carry consistent signal.
struct CitySpec {
    int n = 80;          // regions
    int g = 4;           // functions
    int categories = 24;  // POI categories (F)
    int intervals = 24;   // time intervals per day (N_t)
    long trips_total = 50000;
    double noise = 0.1;    // sigma of the popularity noise
    double overlap = 0.5;  // 0 = disjoint function profiles, 1 = identical
    double poi_mean = 40.0;
    uint64_t seed = 7;
};

struct GroundTruth {
    std::vector<int> labels;                            // function per region
    std::vector<std::vector<double>> poi_profiles;      // g x F
    std::vector<std::vector<double>> dest_function;     // g x g
    std::vector<std::vector<double>> hour_profiles;     // g x N_t
    std::vector<double> popularity_weights;             // g
};

struct City {
    GroundTruth truth;
    std::vector<data::PoiRecord> pois;
    std::vector<data::TripRecord> trips;
    std::vector<long long> checkins;  // per region
};

GroundTruth make_ground_truth(const CitySpec& spec);
City generate_city(const CitySpec& spec);

// Writes pois.csv, trips.csv, checkins.csv, labels.csv into dir.
void write_city_csvs(const City& city, const std::string& dir);

}  // namespace recp::synth
