#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kanoc {

/// Everything one `run` invocation needs; mirrors the CLI flags.
struct RunConfig {
    std::string problem;      // builtin id; empty when a config file is used
    std::string config_path;  // problem definition file
    std::string out_dir = "kanoc_out";
    std::uint64_t seed = 0;
    std::string model = "both";  // kan | mlp | both
    std::optional<int> quad_order;
    std::optional<int> frac_grid;
    std::optional<int> volterra_order;
    std::optional<int> eval_grid;
    std::optional<int> max_iters;
    std::optional<double> weight_cost, weight_residual, weight_boundary, weight_observation;
    bool export_caputo = false;
    bool save_models = false;
};

/// Trains the selected models and writes metrics.json, solution[_mlp].csv,
/// trace[_mlp].csv, run_config.json (and optional extras) into out_dir.
int cmd_run(const RunConfig& config);

/// Renders a criteria-by-model table per problem from completed run
/// directories; optionally also writes it as CSV.
int cmd_table(const std::vector<std::string>& dirs, const std::string& csv_path = {});

/// Runs the numeric oracle suites and reports pass/fail per suite.
int cmd_validate();

}  // namespace kanoc
