#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "recp/synth.hpp"
#include "recp/train.hpp"

namespace recp::config {

// TOML-style sections of key = value pairs; values are integers, reals,
// booleans, or (optionally quoted) strings. '#' starts a comment. Keys are
// addressed as "section.key".
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<inline>");

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    // Sorted "key=value" lines; the FNV-1a hash of this string identifies the
    // effective configuration in run_meta.json and checkpoints.
    std::string canonical() const;
    uint64_t hash() const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

train::TrainConfig make_train_config(const Config& c);
synth::CitySpec make_city_spec(const Config& c);

struct EvalConfig {
    int k = 29;
    int runs = 10;
    int folds = 5;
};
EvalConfig make_eval_config(const Config& c);

uint64_t fnv1a(const std::string& s);

}  // namespace recp::config
