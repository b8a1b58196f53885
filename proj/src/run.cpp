#include "kanoc/run.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "kanoc/caputo.hpp"
#include "kanoc/networks.hpp"
#include "kanoc/trainer.hpp"
#include "kanoc/validate.hpp"

namespace kanoc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> coord_names(int dim) {
    if (dim == 1) return {"tau"};
    if (dim == 2) return {"zeta", "tau"};
    return {"zeta1", "zeta2", "tau"};
}

std::vector<std::string> function_names(int states) {
    std::vector<std::string> names{"psi"};
    if (states == 1)
        names.push_back("xi");
    else
        for (int s = 1; s <= states; ++s) names.push_back("xi" + std::to_string(s));
    return names;
}

void write_solution_csv(const std::string& path, const TrainResult& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    const auto coords = coord_names(r.problem.dim);
    const auto fns = function_names(r.problem.states);
    const bool exact = r.problem.has_exact();

    for (std::size_t d = 0; d < coords.size(); ++d) out << (d ? "," : "") << coords[d];
    for (const auto& f : fns) {
        out << ',' << f << "_pred";
        if (exact) out << ',' << f << "_exact," << f << "_abs_err";
    }
    out << '\n';

    for (const auto& p : eval_grid(r.problem, r.eval_per_dim)) {
        for (int d = 0; d < r.problem.dim; ++d) out << (d ? "," : "") << num(p[d]);
        for (int fi = 0; fi <= r.problem.states; ++fi) {
            const double pred = fi == 0 ? r.predict_control(p) : r.predict_state(fi - 1, p);
            out << ',' << num(pred);
            if (exact) {
                const double ex = fi == 0 ? r.problem.exact_control.eval_at(p)
                                          : r.problem.exact_states[fi - 1].eval_at(p);
                out << ',' << num(ex) << ',' << num(std::abs(pred - ex));
            }
        }
        out << '\n';
    }
}

void write_trace_csv(const std::string& path, const TrainResult& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "iteration,total,cost,residual,boundary,observation";
    for (const auto& s : r.problem.scalars) out << ',' << s.name;
    out << '\n';
    for (const auto& row : r.trace) {
        out << row.loss.iteration << ',' << num(row.loss.total) << ',' << num(row.loss.cost) << ','
            << num(row.loss.residual) << ',' << num(row.loss.boundary) << ','
            << num(row.loss.observation);
        for (double v : row.scalars) out << ',' << num(v);
        out << '\n';
    }
}

void add_metrics(json& m, const std::string& prefix, const TrainResult& r) {
    const auto fns = function_names(r.problem.states);
    m[prefix + "J"] = r.final_loss.cost;
    m[prefix + "final_loss"] = r.final_loss.total;
    m[prefix + "residual_term"] = r.final_loss.residual;
    m[prefix + "boundary_term"] = r.final_loss.boundary;
    m[prefix + "observation_term"] = r.final_loss.observation;
    if (r.mae_control) {
        m[prefix + "mae_psi"] = *r.mae_control;
        for (int s = 0; s < r.problem.states; ++s)
            m[prefix + "mae_" + fns[s + 1]] = r.mae_states[s];
    }
    for (const auto& [name, value] : r.scalar_values) m[prefix + name] = value;
    m[prefix + "iterations"] = r.iterations;
    m[prefix + "status"] = static_cast<int>(r.status);
    m[prefix + "wall_time_s"] = r.wall_seconds;
}

}  // namespace

int cmd_run(const RunConfig& config) {
    ControlProblem problem = config.config_path.empty() ? builtin_problem(config.problem)
                                                        : load_problem_config(config.config_path);
    fs::create_directories(config.out_dir);

    std::vector<std::string> models;
    if (config.model == "both")
        models = {"kan", "mlp"};
    else if (config.model == "kan" || config.model == "mlp")
        models = {config.model};
    else
        throw std::invalid_argument("run: --model must be kan, mlp or both");

    json metrics;
    metrics["seed"] = config.seed;
    for (const auto& model : models) {
        TrainConfig tc;
        tc.model = model;
        tc.quad_order = config.quad_order;
        tc.frac_grid = config.frac_grid;
        tc.volterra_order = config.volterra_order;
        tc.eval_per_dim = config.eval_grid;
        tc.weight_cost = config.weight_cost;
        tc.weight_residual = config.weight_residual;
        tc.weight_boundary = config.weight_boundary;
        tc.weight_observation = config.weight_observation;
        if (config.max_iters) tc.max_iterations = *config.max_iters;

        const TrainResult result = train(problem, tc, config.seed);
        const std::string suffix = model == "kan" ? "" : "_" + model;
        write_solution_csv((fs::path(config.out_dir) / ("solution" + suffix + ".csv")).string(),
                           result);
        write_trace_csv((fs::path(config.out_dir) / ("trace" + suffix + ".csv")).string(), result);
        add_metrics(metrics, model == "kan" ? "" : model + "_", result);
        if (config.save_models)
            for (std::size_t i = 0; i < result.nets.size(); ++i)
                save_network(*result.nets[i], *result.store,
                             (fs::path(config.out_dir) /
                              ("model_" + model + "_" + result.nets[i]->slice_name() + ".json"))
                                 .string());
        std::printf("[%s] %s: J=%.3g total=%.3g", problem.name.c_str(), model.c_str(),
                    result.final_loss.cost, result.final_loss.total);
        if (result.mae_control) std::printf(" mae_psi=%.3g", *result.mae_control);
        std::printf(" iters=%d status=%s wall=%.1fs\n", result.iterations, to_string(result.status),
                    result.wall_seconds);
    }

    if (config.export_caputo) {
        for (const auto& r : problem.residuals) {
            if (!r.caputo) continue;
            const int m = config.frac_grid.value_or(problem.grids.frac_grid);
            std::vector<double> grid(m);
            for (int j = 0; j < m; ++j)
                grid[j] = problem.lo[0] + (problem.hi[0] - problem.lo[0]) * j / (m - 1);
            CaputoMatrix(r.caputo->alpha, grid)
                .export_csv((fs::path(config.out_dir) / "caputo_matrix.csv").string());
            break;
        }
    }

    {
        std::ofstream out(fs::path(config.out_dir) / "metrics.json");
        out << metrics.dump(2) << '\n';
    }
    {
        json rc;
        rc["problem"] = problem.name;
        rc["models"] = models;
        rc["seed"] = config.seed;
        if (config.quad_order) rc["quad_order"] = *config.quad_order;
        if (config.frac_grid) rc["frac_grid"] = *config.frac_grid;
        if (config.eval_grid) rc["eval_grid"] = *config.eval_grid;
        if (config.max_iters) rc["max_iters"] = *config.max_iters;
        std::ofstream out(fs::path(config.out_dir) / "run_config.json");
        out << rc.dump(2) << '\n';
    }
    return 0;
}

int cmd_table(const std::vector<std::string>& dirs, const std::string& csv_path) {
    if (dirs.empty()) {
        std::fprintf(stderr, "table: no run directories given\n");
        return 1;
    }
    // (problem, model) -> metrics, later directories win
    std::map<std::string, std::map<std::string, json>> cells;
    std::set<std::string> all_models;
    bool any = false;
    for (const auto& dir : dirs) {
        const fs::path mpath = fs::path(dir) / "metrics.json";
        const fs::path cpath = fs::path(dir) / "run_config.json";
        if (!fs::exists(mpath) || !fs::exists(cpath)) {
            std::fprintf(stderr, "table: warning: %s has no completed run, leaving blank\n",
                         dir.c_str());
            continue;
        }
        json metrics, rc;
        std::ifstream(mpath) >> metrics;
        std::ifstream(cpath) >> rc;
        const std::string problem = rc.at("problem").get<std::string>();
        for (const auto& model : rc.at("models").get<std::vector<std::string>>()) {
            if (cells[problem].count(model))
                std::fprintf(stderr, "table: warning: duplicate %s/%s run, later one wins\n",
                             problem.c_str(), model.c_str());
            const std::string prefix = model == "kan" ? "" : model + "_";
            json cell;
            for (auto it = metrics.begin(); it != metrics.end(); ++it) {
                const std::string& key = it.key();
                if (model == "kan") {
                    if (key.rfind("mlp_", 0) == 0 || key == "seed") continue;
                    cell[key] = it.value();
                } else if (key.rfind(prefix, 0) == 0) {
                    cell[key.substr(prefix.size())] = it.value();
                }
            }
            if (!cell.empty()) {
                cells[problem][model] = cell;
                all_models.insert(model);
                any = true;
            }
        }
    }
    if (!any) {
        std::fprintf(stderr, "table: no usable runs found\n");
        return 1;
    }

    std::ofstream csv;
    if (!csv_path.empty()) csv.open(csv_path);

    for (const auto& [problem, row] : cells) {
        // criteria: J then per-function MAEs present in any cell
        std::vector<std::string> criteria{"J"};
        std::set<std::string> maes;
        for (const auto& [model, cell] : row)
            for (auto it = cell.begin(); it != cell.end(); ++it)
                if (it.key().rfind("mae_", 0) == 0) maes.insert(it.key());
        for (const auto& k : maes) criteria.push_back(k);

        std::printf("\n## %s\n\n| criterion |", problem.c_str());
        for (const auto& m : all_models) std::printf(" %s |", m.c_str());
        std::printf("\n|---|");
        for (std::size_t i = 0; i < all_models.size(); ++i) std::printf("---|");
        std::printf("\n");
        for (const auto& c : criteria) {
            std::printf("| %s |", c.c_str());
            if (csv.is_open()) csv << problem << ',' << c;
            for (const auto& m : all_models) {
                const auto cell = row.find(m);
                if (cell != row.end() && cell->second.contains(c)) {
                    const double v = cell->second.at(c).get<double>();
                    std::printf(" %.3g |", v);
                    if (csv.is_open()) csv << ',' << num(v);
                } else {
                    std::printf("  |");
                    if (csv.is_open()) csv << ',';
                }
            }
            std::printf("\n");
            if (csv.is_open()) csv << '\n';
        }
    }
    return 0;
}

int cmd_validate() {
    int failures = 0;
    for (const auto& suite : validate_all()) {
        std::printf("[%s] %s: %s\n", suite.passed ? "PASS" : "FAIL", suite.name.c_str(),
                    suite.detail.c_str());
        if (!suite.passed) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace kanoc
