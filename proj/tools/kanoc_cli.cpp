#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kanoc/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"kanoc - optimal control solver built on Kolmogorov-Arnold networks"};
    app.require_subcommand(1);

    kanoc::RunConfig rc;
    auto* run = app.add_subcommand("run", "train on one problem and export results");
    run->add_option("--problem", rc.problem, "builtin problem id");
    run->add_option("--config", rc.config_path, "problem definition file");
    run->add_option("--seed", rc.seed, "run seed");
    run->add_option("--model", rc.model, "kan | mlp | both")->default_str("both");
    run->add_option("--out", rc.out_dir, "output directory");
    run->add_option("--quad-order", rc.quad_order, "quadrature order per dimension");
    run->add_option("--frac-grid", rc.frac_grid, "Caputo grid size M");
    run->add_option("--volterra-order", rc.volterra_order, "inner quadrature order");
    run->add_option("--eval-grid", rc.eval_grid, "evaluation grid points per dimension");
    run->add_option("--max-iters", rc.max_iters, "optimizer iteration cap");
    run->add_option("--weight-J", rc.weight_cost, "cost-term weight");
    run->add_option("--weight-R", rc.weight_residual, "residual-term weight");
    run->add_option("--weight-B", rc.weight_boundary, "boundary-term weight");
    run->add_option("--weight-O", rc.weight_observation, "observation-term weight");
    run->add_flag("--export-caputo", rc.export_caputo, "write caputo_matrix.csv");
    run->add_flag("--save-models", rc.save_models, "write trained network parameters");

    std::vector<std::string> table_dirs;
    std::string table_csv;
    auto* table = app.add_subcommand("table", "comparison table from completed runs");
    table->add_option("dirs", table_dirs, "run directories");
    table->add_option("--csv", table_csv, "also write the table as CSV");

    auto* validate = app.add_subcommand("validate", "run the numeric oracle suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (rc.problem.empty() && rc.config_path.empty())
                throw std::invalid_argument("run: need --problem or --config");
            return kanoc::cmd_run(rc);
        }
        if (table->parsed()) return kanoc::cmd_table(table_dirs, table_csv);
        if (validate->parsed()) return kanoc::cmd_validate();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "kanoc: %s\n", e.what());
        return 1;
    }
    return 0;
}
