#include "support/fixtures.hpp"

#include "thermomesh/io.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs the CLI with stdout captured to a file and stderr discarded.
Run cli(const std::string& args, const fs::path& dir) {
    const fs::path log = dir / "stdout.txt";
    const std::string cmd = std::string(THERMOMESH_CLI) + " " + args + " > " + log.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream os;
    os << in.rdbuf();
    r.out = os.str();
    return r;
}

fs::path fresh(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("thermomesh_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("matrix writes A and its summary") {
    const auto dir = fresh("matrix");
    const std::string cfg = fixtures::config_path("linear_3x3");
    const auto r = cli("matrix " + cfg + " --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    for (const char* f : {"A.csv", "A_triplets.csv", "sensitivity_map.csv", "net.csv", "matrix_summary.json"}) {
        CHECK(fs::exists(dir / f));
    }
    const auto a = thermomesh::read_matrix_csv((dir / "A.csv").string());
    CHECK(a.entries.rows() == 12);
    CHECK(a.entries.cols() == 9);
    CHECK(a.meta.at("config_hash") == fixtures::shipped("linear_3x3").hash);
    std::ifstream js(dir / "matrix_summary.json");
    const auto summary = nlohmann::json::parse(js);
    CHECK(summary.contains("sigma_min"));
    fs::remove_all(dir);
}

TEST_CASE("exit codes for bad invocations") {
    const auto dir = fresh("codes");
    const std::string cfg = fixtures::config_path("linear_3x3");
    CHECK(cli("sweep " + cfg + " bogus --out " + dir.string(), dir).code == 2);
    CHECK(cli("matrix /nonexistent.yaml --out " + dir.string(), dir).code == 2);
    CHECK(cli("", dir).code == 2);
    CHECK(cli("rare-event " + cfg + " --out " + dir.string(), dir).code == 2);
    CHECK(cli("recover " + cfg + " --out " + dir.string(), dir).code == 3);
    fs::remove_all(dir);
}

TEST_CASE("dataset, recover and eval pipeline") {
    const auto dir = fresh("pipeline");
    const std::string cfg = fixtures::config_path("linear_3x3");
    const std::string out = " --out " + dir.string();
    REQUIRE(cli("dataset " + cfg + out, dir).code == 0);
    for (const char* f : {"dataset_snr_inf.csv", "dataset_snr_40.csv", "dataset_snr_20.csv"}) {
        CHECK(fs::exists(dir / f));
    }
    REQUIRE(cli("recover " + cfg + out, dir).code == 0);
    CHECK(fs::exists(dir / "results_snr_inf_omp.csv"));
    const auto ev = cli("eval " + cfg + out, dir);
    REQUIRE(ev.code == 0);
    std::ifstream js(dir / "eval_summary.json");
    const auto summary = nlohmann::json::parse(js);
    bool saw_clean = false;
    for (const auto& rep : summary["reports"]) {
        if (rep["snr_db"] == "inf") {
            saw_clean = true;
            CHECK(rep["accuracy"].get<double>() == 1.0);
        }
    }
    CHECK(saw_clean);
    // A different seed is a different configuration hash.
    CHECK(cli("eval " + cfg + out + " --seed 1", dir).code == 3);
    fs::remove_all(dir);
}

TEST_CASE("check prints PASS lines") {
    const auto dir = fresh("check");
    const auto r = cli("check " + fixtures::config_path("linear_3x3") + " --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("PASS ") != std::string::npos);
    CHECK(r.out.find("FAIL ") == std::string::npos);
    CHECK(fs::exists(dir / "check_summary.json"));
    fs::remove_all(dir);
}

TEST_CASE("rare-event rates") {
    const auto dir = fresh("rare");
    const auto r = cli("rare-event " + fixtures::config_path("contact_mode") + " --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("P_e_max") != std::string::npos);
    for (const char* f : {"rare_event_rates.csv", "rare_event_curves.csv", "rare_event_summary.json"}) {
        CHECK(fs::exists(dir / f));
    }
    fs::remove_all(dir);
}
