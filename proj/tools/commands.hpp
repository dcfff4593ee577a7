#pragma once

#include "thermomesh/config.hpp"

#include <string>
#include <vector>

namespace thermomesh::cli {

struct Context {
    RunConfig config;
    std::string out_dir;
};

void cmd_matrix(const Context& ctx);
/// kind is one of r, size, kappa, temp.
void cmd_sweep(const Context& ctx, const std::string& kind);
void cmd_dataset(const Context& ctx);
/// method "omp" or "matched"; empty inputs mean every dataset_*.csv in out_dir.
void cmd_recover(const Context& ctx, const std::string& method, std::vector<std::string> inputs);
/// Empty inputs mean every results_*.csv in out_dir.
void cmd_eval(const Context& ctx, std::vector<std::string> inputs);
void cmd_rare_event(const Context& ctx);
void cmd_check(const Context& ctx);

}  // namespace thermomesh::cli
