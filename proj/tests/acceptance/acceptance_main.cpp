// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// hard criterion fails. Training runs are cached and reused across criteria.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "kanoc/problem.hpp"
#include "kanoc/run.hpp"
#include "kanoc/trainer.hpp"
#include "kanoc/validate.hpp"

using namespace kanoc;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail, bool hard = true) {
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : (hard ? "FAIL" : "SOFT-FAIL"),
                criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass && hard) ++failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

std::map<std::string, TrainResult> cache;

const TrainResult& run(const std::string& problem, const std::string& model, std::uint64_t seed) {
    const std::string key = problem + "/" + model + "/" + std::to_string(seed);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    TrainConfig tc;
    tc.model = model;
    TrainResult r = train(builtin_problem(problem), tc, seed);
    std::printf("    .. trained %s: J=%.3g mae_psi=%.3g iters=%d wall=%.0fs\n", key.c_str(),
                r.final_loss.cost, r.mae_control.value_or(-1.0), r.iterations, r.wall_seconds);
    std::fflush(stdout);
    return cache.emplace(key, std::move(r)).first->second;
}

double median3(double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string metrics_without_wall_time(const fs::path& p) {
    nlohmann::json j;
    std::ifstream in(p);
    in >> j;
    std::vector<std::string> drop;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key().find("wall_time") != std::string::npos) drop.push_back(it.key());
    for (const auto& k : drop) j.erase(k);
    return j.dump(2);
}

}  // namespace

int main() {
    std::printf("== kanoc acceptance suite ==\n");

    // ---- paper-number reproduction ----
    {
        const TrainResult& r = run("frac_forward", "kan", 0);
        const bool pass = r.final_loss.cost <= 1e-5 && *r.mae_control <= 5e-3 &&
                          r.mae_states[0] <= 1e-3 && r.mae_states[1] <= 1e-3;
        report(1, pass,
               fmt("frac_forward: J=%.3g (<=1e-5), mae_psi=%.3g (<=5e-3), mae_xi1=%.3g (<=1e-3), "
                   "mae_xi2=%.3g (<=1e-3)",
                   r.final_loss.cost, *r.mae_control, r.mae_states[0], r.mae_states[1]));
    }
    {
        const TrainResult& r = run("frac_inverse", "kan", 0);
        const double kappa_star = 15.0 * std::sqrt(3.14159265358979323846) / 16.0;
        const double kappa = r.scalar_values.at("kappa");
        const bool pass = std::abs(kappa - kappa_star) <= 0.05 && r.final_loss.cost <= 1e-4;
        report(2, pass,
               fmt("frac_inverse: |kappa-%.5f|=%.3g (<=0.05), J=%.3g (<=1e-4)", kappa_star,
                   std::abs(kappa - kappa_star), r.final_loss.cost));
    }
    {
        const TrainResult& r = run("ide", "kan", 0);
        const bool pass = r.mae_states[0] <= 5e-3 && *r.mae_control <= 2e-2;
        report(3, pass,
               fmt("ide: mae_xi=%.3g (<=5e-3), mae_psi=%.3g (<=2e-2)", r.mae_states[0],
                   *r.mae_control));
    }
    {
        const TrainResult& r = run("pde2d", "kan", 0);
        const bool pass = *r.mae_control <= 5e-3 && r.mae_states[0] <= 5e-3;
        report(4, pass,
               fmt("pde2d: mae_psi=%.3g (<=5e-3), mae_xi=%.3g (<=5e-3)", *r.mae_control,
                   r.mae_states[0]));
    }
    {
        const TrainResult& r = run("heat2d", "kan", 0);
        const bool pass = *r.mae_control <= 1e-2 && r.mae_states[0] <= 2e-2;
        report(5, pass,
               fmt("heat2d: mae_psi=%.3g (<=1e-2), mae_xi=%.3g (<=2e-2)", *r.mae_control,
                   r.mae_states[0]));
    }

    // ---- criterion 6: KAN vs MLP ordering over 3 seeds (soft) ----
    {
        bool kan_leads = true;
        int mlp_wins_5x = 0;
        std::string detail;
        for (const std::string problem : {"frac_forward", "ide"}) {
            double kan[3], mlp[3];
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                kan[seed] = *run(problem, "kan", seed).mae_control;
                mlp[seed] = *run(problem, "mlp", seed).mae_control;
            }
            const double mk = median3(kan[0], kan[1], kan[2]);
            const double mm = median3(mlp[0], mlp[1], mlp[2]);
            detail += fmt("%s median mae_psi kan=%.3g mlp=%.3g; ", problem.c_str(), mk, mm);
            if (mk > mm) kan_leads = false;
            if (mk > 5.0 * mm) ++mlp_wins_5x;
        }
        // soft criterion: report the ordering; hard failure only when the MLP
        // wins by more than 5x on both problems
        const bool hard_fail = mlp_wins_5x == 2;
        report(6, kan_leads, detail + (kan_leads ? "(kan leads)" : "(reported, soft)"), hard_fail);
    }

    // ---- property criteria ----
    {
        const SuiteResult r = validate_quadrature();
        report(7, r.passed, "gauss-legendre exactness: " + r.detail);
    }
    {
        const SuiteResult r = validate_caputo();
        report(8, r.passed, "caputo monomial oracle: " + r.detail);
    }
    {
        const SuiteResult r = validate_autodiff();
        report(9, r.passed, "autodiff vs finite differences: " + r.detail);
    }
    {
        const SuiteResult r = validate_bspline();
        report(10, r.passed, "b-spline properties: " + r.detail);
    }
    {
        double smooth = 0.0, caputo = 0.0, cond = 0.0;
        for (const std::string id : {"frac_forward", "frac_inverse", "ide", "pde2d", "heat2d"}) {
            const TranscriptionReport rep = check_transcription(builtin_problem(id));
            smooth = std::max(smooth, rep.max_smooth_residual);
            caputo = std::max(caputo, rep.max_caputo_residual);
            cond = std::max(cond, rep.max_condition_error);
        }
        const bool pass = smooth <= 1e-6 && caputo <= 1e-2 && cond <= 1e-12;
        report(11, pass,
               fmt("exact-solution transcription: smooth=%.3g (<=1e-6), caputo=%.3g (<=1e-2), "
                   "conditions=%.3g (<=1e-12)",
                   smooth, caputo, cond));
    }

    // ---- criterion 12: byte-identical outputs for identical configs ----
    {
        const fs::path base = fs::temp_directory_path() / "kanoc_acceptance_det";
        fs::remove_all(base);
        RunConfig rc;
        rc.problem = "frac_forward";
        rc.model = "kan";
        rc.seed = 7;
        rc.max_iters = 40;
        rc.frac_grid = 300;
        rc.eval_grid = 201;
        rc.out_dir = (base / "a").string();
        cmd_run(rc);
        rc.out_dir = (base / "b").string();
        cmd_run(rc);
        const bool metrics_same = metrics_without_wall_time(base / "a" / "metrics.json") ==
                                  metrics_without_wall_time(base / "b" / "metrics.json");
        const bool trace_same = slurp(base / "a" / "trace.csv") == slurp(base / "b" / "trace.csv");
        const bool solution_same =
            slurp(base / "a" / "solution.csv") == slurp(base / "b" / "solution.csv");
        report(12, metrics_same && trace_same && solution_same,
               std::string("determinism: metrics.json byte-identical modulo wall_time_s keys ") +
                   (metrics_same ? "yes" : "NO") + ", trace.csv " + (trace_same ? "yes" : "NO") +
                   ", solution.csv " + (solution_same ? "yes" : "NO"));
        fs::remove_all(base);
    }

    std::printf("== %d hard failure(s) ==\n", failures);
    return failures == 0 ? 0 : 1;
}
