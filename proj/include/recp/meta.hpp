#pragma once

#include <cstdint>
#include <string>

namespace recp::meta {

inline constexpr const char* kVersion = "0.1.0";

// RECP_LOG env var: error | warn | info | debug (default info).
enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };
LogLevel log_level();
bool should_log(LogLevel level);

// Every CLI run drops one of these into its output directory.
void write_run_meta(const std::string& out_dir, const std::string& command,
                    uint64_t config_hash, uint64_t seed, double wall_seconds);

struct DataMeta {
    int n = 0;
    int categories = 0;
    int intervals = 0;
    long trips = 0;
    int functions = 0;
};

void write_data_meta(const std::string& dir, const DataMeta& m);
// Returns false if <dir>/data_meta.json does not exist.
bool read_data_meta(const std::string& dir, DataMeta& m);

}  // namespace recp::meta
