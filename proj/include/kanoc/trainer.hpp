#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kanoc/lbfgs.hpp"
#include "kanoc/loss.hpp"
#include "kanoc/networks.hpp"
#include "kanoc/problem.hpp"

namespace kanoc {

struct TrainConfig {
    std::string model = "kan";  // "kan" or "mlp"
    std::vector<int> hidden = {10};
    int degree = 3;
    int grid_intervals = 5;
    std::optional<int> quad_order;
    std::optional<int> frac_grid;
    std::optional<int> volterra_order;
    std::optional<int> eval_per_dim;
    std::optional<double> weight_cost, weight_residual, weight_boundary, weight_observation;
    int max_iterations = 2000;
    LbfgsParams lbfgs;
};

struct TraceRow {
    LossBreakdown loss;
    std::vector<double> scalars;  // problem scalars, in declaration order
};

/// Everything one optimization run produces: trained parameters, the loss
/// trace, final metrics against the exact solution (when the problem has
/// one), and the optimizer diagnostics.
struct TrainResult {
    ControlProblem problem;  // with any weight overrides applied
    std::unique_ptr<ParameterStore> store;
    std::vector<std::unique_ptr<Network>> nets;  // control first, then states
    std::vector<TraceRow> trace;
    LossBreakdown final_loss;
    std::map<std::string, double> scalar_values;
    std::optional<double> mae_control;
    std::vector<double> mae_states;
    LbfgsStatus status = LbfgsStatus::kMaxIterations;
    int iterations = 0;
    int evaluations = 0;
    double wall_seconds = 0.0;
    int eval_per_dim = 0;

    double predict_control(std::span<const double> point) const;
    double predict_state(int state, std::span<const double> point) const;
};

/// Builds one network per unknown ([dim, hidden..., 1]), assembles the loss,
/// and minimizes it with L-BFGS. Fully deterministic for a fixed seed.
TrainResult train(const ControlProblem& problem, const TrainConfig& config, std::uint64_t seed);

/// Uniform inclusive evaluation grid, points_per_dim per dimension.
std::vector<std::vector<double>> eval_grid(const ControlProblem& problem, int points_per_dim);

}  // namespace kanoc
