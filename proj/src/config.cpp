#include "recp/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "recp/errors.hpp"

namespace recp::config {

namespace {

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

Config parse_lines(std::istream& in, const std::string& origin) {
    Config cfg;
    std::string line, section;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments (quotes may contain '#')
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": malformed section header '" + t + "'");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        cfg.set(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_lines(in, path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    return parse_lines(in, origin);
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    int64_t out = 0;
    const std::string& v = it->second;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    return out;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        const double out = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + it->second + "'");
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t Config::hash() const { return fnv1a(canonical()); }

train::TrainConfig make_train_config(const Config& c) {
    train::TrainConfig t;
    t.epochs = static_cast<int>(c.get_int("train.epochs", t.epochs));
    t.lr0 = c.get_double("train.lr0", t.lr0);
    t.seed = static_cast<uint64_t>(c.get_int("train.seed", 0));
    t.d = static_cast<int>(c.get_int("train.d", t.d));
    t.enc_hidden = static_cast<int>(c.get_int("train.enc_hidden", t.enc_hidden));
    t.pred_hidden = static_cast<int>(c.get_int("train.pred_hidden", t.pred_hidden));
    t.log_every = static_cast<int>(c.get_int("train.log_every", t.log_every));
    t.ablation = train::ablation_from_string(c.get_string("train.ablation", "full"));
    t.tau = c.get_double("loss.tau", t.tau);
    t.mu = c.get_double("loss.mu", t.mu);
    t.alpha = c.get_double("loss.alpha", t.alpha);
    t.lambda1 = c.get_double("loss.lambda1", t.lambda1);
    t.lambda2 = c.get_double("loss.lambda2", t.lambda2);
    t.k_attr = static_cast<int>(c.get_int("aug.k_attribute", t.k_attr));
    t.k_mob = static_cast<int>(c.get_int("aug.k_mobility", t.k_mob));
    t.drop_rate = c.get_double("aug.drop_rate", t.drop_rate);
    return t;
}

synth::CitySpec make_city_spec(const Config& c) {
    synth::CitySpec s;
    s.n = static_cast<int>(c.get_int("synth.n", s.n));
    s.g = static_cast<int>(c.get_int("synth.functions", s.g));
    s.categories = static_cast<int>(c.get_int("synth.categories", s.categories));
    s.intervals = static_cast<int>(c.get_int("synth.intervals", s.intervals));
    s.trips_total = c.get_int("synth.trips", s.trips_total);
    s.noise = c.get_double("synth.noise", s.noise);
    s.overlap = c.get_double("synth.overlap", s.overlap);
    s.poi_mean = c.get_double("synth.poi_mean", s.poi_mean);
    s.seed = static_cast<uint64_t>(c.get_int("synth.seed", static_cast<int64_t>(s.seed)));
    return s;
}

EvalConfig make_eval_config(const Config& c) {
    EvalConfig e;
    e.k = static_cast<int>(c.get_int("eval.k", e.k));
    e.runs = static_cast<int>(c.get_int("eval.runs", e.runs));
    e.folds = static_cast<int>(c.get_int("eval.folds", e.folds));
    return e;
}

}  // namespace recp::config
