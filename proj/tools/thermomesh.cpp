#include "commands.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/parallel.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("thermomesh");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("THERMOMESH_LOG")) {
        const std::string level = env;
        if (level == "error" || level == "warn" || level == "info" || level == "debug") {
            spdlog::set_level(spdlog::level::from_str(level));
        } else {
            spdlog::warn("THERMOMESH_LOG='{}' not one of error, warn, info, debug; using info", level);
        }
    }
}

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("config", c.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "Output directory")->required();
    sub->add_option("--seed", c.seed, "Override the configured seed");
    sub->add_option("--threads", c.threads, "Cap on worker threads (default: all cores)");
}

thermomesh::cli::Context load(const Common& c) {
    std::vector<std::string> overrides;
    if (c.seed) {
        overrides.push_back("seed=" + std::to_string(*c.seed));
    }
    thermomesh::cli::Context ctx{thermomesh::load_config(c.config, overrides), c.out};
    std::filesystem::create_directories(c.out);
    thermomesh::set_max_threads(c.threads);
    spdlog::debug("config {} hash {}", c.config, ctx.config.hash);
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"ThermoMesh boundary-readout thermal sensor toolkit"};
    app.require_subcommand(1);

    Common common;
    std::string sweep_kind;
    std::string method = "";
    std::vector<std::string> inputs;

    auto* matrix = app.add_subcommand("matrix", "Export A, sensitivity maps and NET");
    add_common(matrix, common);

    auto* sweep = app.add_subcommand("sweep", "Sensitivity sweeps");
    add_common(sweep, common);
    sweep->add_option("kind", sweep_kind, "r, size, kappa or temp")
        ->required()
        ->check(CLI::IsMember({"r", "size", "kappa", "temp"}));

    auto* dataset = app.add_subcommand("dataset", "Generate 1-sparse datasets, one file per SNR level");
    add_common(dataset, common);

    auto* recover = app.add_subcommand("recover", "Recover sources from dataset files");
    add_common(recover, common);
    recover->add_option("--method", method, "omp or matched (default: configured)")
        ->check(CLI::IsMember({"omp", "matched"}));
    recover->add_option("--dataset", inputs, "Dataset files (default: dataset_*.csv in --out)");

    auto* eval = app.add_subcommand("eval", "Score results files");
    add_common(eval, common);
    eval->add_option("--results", inputs, "Results files (default: results_*.csv in --out)");

    auto* rare = app.add_subcommand("rare-event", "Admissible event rates and overlap curves");
    add_common(rare, common);

    auto* check = app.add_subcommand("check", "Uniqueness, RC and regime checks");
    add_common(check, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        const auto ctx = load(common);
        namespace cmd = thermomesh::cli;
        if (*matrix) {
            cmd::cmd_matrix(ctx);
        } else if (*sweep) {
            cmd::cmd_sweep(ctx, sweep_kind);
        } else if (*dataset) {
            cmd::cmd_dataset(ctx);
        } else if (*recover) {
            cmd::cmd_recover(ctx, method.empty() ? ctx.config.recovery.method : method, inputs);
        } else if (*eval) {
            cmd::cmd_eval(ctx, inputs);
        } else if (*rare) {
            cmd::cmd_rare_event(ctx);
        } else if (*check) {
            cmd::cmd_check(ctx);
        }
    } catch (const thermomesh::ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return 0;
}
