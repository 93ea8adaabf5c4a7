#include "recp/meta.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "recp/errors.hpp"

namespace recp::meta {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("RECP_LOG");
        if (!env) return LogLevel::Info;
        const std::string s(env);
        if (s == "error") return LogLevel::Error;
        if (s == "warn") return LogLevel::Warn;
        if (s == "debug") return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

bool should_log(LogLevel level) {
    return static_cast<int>(level) <= static_cast<int>(log_level());
}

void write_run_meta(const std::string& out_dir, const std::string& command,
                    uint64_t config_hash, uint64_t seed, double wall_seconds) {
    std::filesystem::create_directories(out_dir);
    char hash_hex[24];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(config_hash));
    nlohmann::json j{{"command", command},
                     {"config_hash", hash_hex},
                     {"seed", seed},
                     {"versions", {{"recp", kVersion}, {"compiler", __VERSION__}}},
                     {"wall_time_s", wall_seconds}};
    std::ofstream f(std::filesystem::path(out_dir) / "run_meta.json");
    if (!f) throw DataError("cannot write run_meta.json in " + out_dir);
    f << j.dump(2) << '\n';
}

void write_data_meta(const std::string& dir, const DataMeta& m) {
    nlohmann::json j{{"n", m.n},
                     {"categories", m.categories},
                     {"intervals", m.intervals},
                     {"trips", m.trips},
                     {"functions", m.functions}};
    std::ofstream f(std::filesystem::path(dir) / "data_meta.json");
    if (!f) throw DataError("cannot write data_meta.json in " + dir);
    f << j.dump(2) << '\n';
}

bool read_data_meta(const std::string& dir, DataMeta& m) {
    std::ifstream f(std::filesystem::path(dir) / "data_meta.json");
    if (!f) return false;
    nlohmann::json j;
    try {
        f >> j;
        m.n = j.at("n").get<int>();
        m.categories = j.at("categories").get<int>();
        m.intervals = j.at("intervals").get<int>();
        m.trips = j.value("trips", 0L);
        m.functions = j.value("functions", 0);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir + "/data_meta.json: " + e.what());
    }
    return true;
}

}  // namespace recp::meta
