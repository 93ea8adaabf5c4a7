#include <cstdlib>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "recp/config.hpp"
#include "test_helpers.hpp"

using namespace recp;
using recp::testing::read_file;
using recp::testing::TempDir;
using recp::testing::write_file;

namespace {

int run_cmd(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmallConfig =
    "[synth]\n"
    "n = 24\n"
    "functions = 3\n"
    "categories = 12\n"
    "intervals = 6\n"
    "trips = 4000\n"
    "seed = 7\n"
    "\n"
    "[train]\n"
    "epochs = 40\n"
    "d = 8\n"
    "enc_hidden = 16\n"
    "pred_hidden = 8\n"
    "\n"
    "[eval]\n"
    "runs = 5\n";

}  // namespace

TEST_CASE("config parser: sections, comments, quotes, hash") {
    const auto cfg = config::Config::parse_string(
        "# top comment\n"
        "[loss]\n"
        "tau = 0.5  # trailing comment\n"
        "name = \"a # quoted\"\n"
        "[train]\n"
        "epochs = 400\n"
        "flag = true\n");
    CHECK(cfg.get_double("loss.tau", 0.0) == 0.5);
    CHECK(cfg.get_string("loss.name", "") == "a # quoted");
    CHECK(cfg.get_int("train.epochs", 0) == 400);
    CHECK(cfg.get_bool("train.flag", false));
    CHECK(cfg.get_int("train.missing", 42) == 42);
    const auto clean = config::Config::parse_string("[a]\nx = 1\ny = 2.5\n[b]\nz = full\n");
    CHECK(clean.hash() == config::Config::parse_string(clean.canonical()).hash());

    CHECK_THROWS_AS(config::Config::parse_string("just a line\n"), ConfigError);
    CHECK_THROWS_AS(config::Config::parse_string("[broken\n"), ConfigError);
    CHECK_THROWS_AS(cfg.get_int("loss.tau", 0), ConfigError);
}

TEST_CASE("config maps onto train and synth settings") {
    const auto cfg = config::Config::parse_string(
        "[loss]\ntau = 0.25\nmu = 0.001\nalpha = 4\n"
        "[aug]\nk_attribute = 2\nk_mobility = 5\ndrop_rate = 0.3\n"
        "[train]\nepochs = 7\nablation = no_dp\n"
        "[synth]\nn = 33\nfunctions = 3\noverlap = 0.4\n");
    const train::TrainConfig tc = config::make_train_config(cfg);
    CHECK(tc.tau == 0.25);
    CHECK(tc.mu == 0.001);
    CHECK(tc.alpha == 4.0);
    CHECK(tc.k_attr == 2);
    CHECK(tc.k_mob == 5);
    CHECK(tc.drop_rate == 0.3);
    CHECK(tc.epochs == 7);
    CHECK(tc.ablation == train::Ablation::NoDp);
    CHECK(tc.lambda1 == 1.0);  // default
    const synth::CitySpec cs = config::make_city_spec(cfg);
    CHECK(cs.n == 33);
    CHECK(cs.overlap == 0.4);
    CHECK(cs.intervals == 24);  // default
}

TEST_CASE("cli pipeline: generate, train, eval-cluster, eval-popularity") {
    TempDir dir("cli");
    write_file(dir.file("synth.toml"), kSmallConfig);
    const std::string ws = dir.file("ws");
    const std::string bin = RECP_BIN;
    const std::string quiet = " >" + dir.file("stdout.txt") + " 2>" + dir.file("stderr.txt");

    REQUIRE(run_cmd(bin + " generate --config " + dir.file("synth.toml") + " --out " + ws +
                    quiet) == 0);
    CHECK(std::filesystem::exists(ws + "/trips.csv"));
    CHECK(std::filesystem::exists(ws + "/run_meta.json"));
    CHECK(std::filesystem::exists(ws + "/data_meta.json"));

    REQUIRE(run_cmd(bin + " train --out " + ws + " --seed 3" + quiet) == 0);
    CHECK(std::filesystem::exists(ws + "/embedding.csv"));
    CHECK(std::filesystem::exists(ws + "/loss_history.csv"));
    CHECK(std::filesystem::exists(ws + "/checkpoint.bin"));

    REQUIRE(run_cmd(bin + " eval-cluster --out " + ws + quiet) == 0);
    const std::string report_text = read_file(ws + "/eval_cluster/report.json");
    REQUIRE_FALSE(report_text.empty());
    const nlohmann::json report = nlohmann::json::parse(report_text);
    CHECK(report.at("task") == "land_usage_clustering");
    CHECK(report.at("k") == 3);  // generate wrote eval.k = functions
    for (const char* metric : {"nmi", "ari", "f_measure"}) {
        CHECK(report.at("metrics").at(metric).at("runs").size() == 5);
        CHECK(report.at("metrics").at(metric).contains("mean"));
        CHECK(report.at("metrics").at(metric).contains("std"));
    }
    CHECK(std::filesystem::exists(ws + "/eval_cluster/labels.csv"));

    REQUIRE(run_cmd(bin + " eval-popularity --out " + ws + quiet) == 0);
    const nlohmann::json pop = nlohmann::json::parse(read_file(ws + "/eval_popularity/report.json"));
    CHECK(pop.at("metrics").contains("mae"));
    CHECK(pop.at("metrics").contains("rmse"));
    CHECK(pop.at("metrics").contains("r2"));
}

TEST_CASE("cli: identical seeds give byte-identical artifacts, different seeds differ") {
    TempDir dir("det");
    write_file(dir.file("synth.toml"), kSmallConfig);
    const std::string ws = dir.file("ws");
    const std::string bin = RECP_BIN;
    const std::string quiet = " >/dev/null 2>&1";

    REQUIRE(run_cmd(bin + " generate --config " + dir.file("synth.toml") + " --out " + ws +
                    quiet) == 0);
    REQUIRE(run_cmd(bin + " train --data " + ws + " --out " + dir.file("r1") + " --seed 5" +
                    quiet) == 0);
    REQUIRE(run_cmd(bin + " train --data " + ws + " --out " + dir.file("r2") + " --seed 5" +
                    quiet) == 0);
    REQUIRE(run_cmd(bin + " train --data " + ws + " --out " + dir.file("r3") + " --seed 6" +
                    quiet) == 0);

    const std::string e1 = read_file(dir.file("r1") + "/embedding.csv");
    CHECK(e1 == read_file(dir.file("r2") + "/embedding.csv"));
    CHECK(e1 != read_file(dir.file("r3") + "/embedding.csv"));
    CHECK(read_file(dir.file("r1") + "/loss_history.csv") ==
          read_file(dir.file("r2") + "/loss_history.csv"));
    CHECK(read_file(dir.file("r1") + "/checkpoint.bin") ==
          read_file(dir.file("r2") + "/checkpoint.bin"));
}

TEST_CASE("cli gradcheck --toy passes") {
    TempDir dir("gc");
    CHECK(run_cmd(std::string(RECP_BIN) + " gradcheck --toy --out " + dir.file("out") + " > " +
                  dir.file("log.txt") + " 2>&1") == 0);
    const std::string log = read_file(dir.file("log.txt"));
    CHECK(log.find("max rel err") != std::string::npos);
}

TEST_CASE("cli error paths use the documented exit codes") {
    TempDir dir("err");
    const std::string bin = RECP_BIN;

    // missing data file -> 2, message names the path
    const int code = run_cmd(bin + " train --data " + dir.file("nowhere") + " --out " +
                             dir.file("out") + " --config /dev/null 2> " + dir.file("err.txt") +
                             " >/dev/null");
    CHECK(code == 2);
    // unknown flag -> 1
    CHECK(run_cmd(bin + " train --bogus-flag 2>/dev/null >/dev/null") == 1);
    // unknown subcommand -> 1
    CHECK(run_cmd(bin + " frobnicate 2>/dev/null >/dev/null") == 1);
    // help -> 0
    CHECK(run_cmd(bin + " --help >/dev/null 2>&1") == 0);
}

TEST_CASE("cli train reports missing trips.csv with its path") {
    TempDir dir("misstrips");
    write_file(dir.file("synth.toml"), kSmallConfig);
    const std::string ws = dir.file("ws");
    const std::string bin = RECP_BIN;
    REQUIRE(run_cmd(bin + " generate --config " + dir.file("synth.toml") + " --out " + ws +
                    " >/dev/null 2>&1") == 0);
    std::filesystem::remove(ws + "/trips.csv");
    const int code =
        run_cmd(bin + " train --out " + ws + " 2> " + dir.file("err.txt") + " >/dev/null");
    CHECK(code == 2);
    CHECK(read_file(dir.file("err.txt")).find("trips.csv") != std::string::npos);
}
