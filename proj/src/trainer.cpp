#include "kanoc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "kanoc/rng.hpp"

namespace kanoc {

namespace {

std::vector<double> scale_point(const ControlProblem& p, std::span<const double> point) {
    std::vector<double> z(p.dim);
    for (int d = 0; d < p.dim; ++d)
        z[d] = 2.0 * (point[d] - p.lo[d]) / (p.hi[d] - p.lo[d]) - 1.0;
    return z;
}

}  // namespace

double TrainResult::predict_control(std::span<const double> point) const {
    return nets[0]->eval_scalar(*store, scale_point(problem, point));
}

double TrainResult::predict_state(int state, std::span<const double> point) const {
    return nets[state + 1]->eval_scalar(*store, scale_point(problem, point));
}

std::vector<std::vector<double>> eval_grid(const ControlProblem& problem, int points_per_dim) {
    std::vector<std::vector<double>> axes(problem.dim);
    for (int d = 0; d < problem.dim; ++d)
        for (int j = 0; j < points_per_dim; ++j)
            axes[d].push_back(problem.lo[d] +
                              (problem.hi[d] - problem.lo[d]) * j / (points_per_dim - 1));
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> idx(problem.dim, 0);
    std::size_t total = 1;
    for (int d = 0; d < problem.dim; ++d) total *= points_per_dim;
    out.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        std::vector<double> p(problem.dim);
        for (int d = 0; d < problem.dim; ++d) p[d] = axes[d][idx[d]];
        out.push_back(std::move(p));
        for (int d = problem.dim - 1; d >= 0; --d) {
            if (++idx[d] < axes[d].size()) break;
            idx[d] = 0;
        }
    }
    return out;
}

TrainResult train(const ControlProblem& problem_in, const TrainConfig& config, std::uint64_t seed) {
    const auto t_start = std::chrono::steady_clock::now();

    TrainResult result;
    result.problem = problem_in;
    ControlProblem& problem = result.problem;
    if (config.weight_cost) problem.weights.cost = *config.weight_cost;
    if (config.weight_residual) problem.weights.residual = *config.weight_residual;
    if (config.weight_boundary) problem.weights.boundary = *config.weight_boundary;
    if (config.weight_observation) problem.weights.observation = *config.weight_observation;
    problem.validate();

    result.store = std::make_unique<ParameterStore>();
    ParameterStore& store = *result.store;

    std::vector<int> widths;
    widths.push_back(problem.dim);
    for (int h : config.hidden) widths.push_back(h);
    widths.push_back(1);

    const int n_nets = problem.states + 1;
    for (int i = 0; i < n_nets; ++i) {
        auto net = make_network(config.model, widths, config.degree, config.grid_intervals);
        const std::string name = i == 0 ? "psi" : "xi" + std::to_string(i);
        net->register_params(store, name);
        net->init(store, mix_seed(seed, static_cast<std::uint64_t>(i)));
        result.nets.push_back(std::move(net));
    }
    for (const auto& s : problem.scalars) {
        const std::size_t off = store.register_slice(s.name, 1);
        store[off] = s.initial;
    }

    LossAssembler::Options opts;
    opts.quad_order = config.quad_order.value_or(0);
    opts.frac_grid = config.frac_grid.value_or(0);
    opts.volterra_order = config.volterra_order.value_or(0);
    std::vector<Network*> net_ptrs;
    for (auto& n : result.nets) net_ptrs.push_back(n.get());
    LossAssembler assembler(problem, net_ptrs, store, opts);

    LbfgsParams lb = config.lbfgs;
    lb.max_iterations = config.max_iterations;

    auto fn = [&](std::span<const double> x, std::span<double> grad) -> double {
        return assembler.eval(x, grad);
    };
    auto callback = [&](int iteration, std::span<const double> x, double) {
        TraceRow row;
        row.loss = assembler.breakdown(x);
        row.loss.iteration = iteration;
        for (const auto& s : problem.scalars) row.scalars.push_back(x[store.slice(s.name).offset]);
        result.trace.push_back(std::move(row));
    };

    LbfgsResult opt = lbfgs_minimize(fn, store.flatten(), lb, callback);
    store.assign(opt.x);
    result.final_loss = assembler.breakdown(opt.x);
    result.final_loss.iteration = opt.iterations;
    result.status = opt.status;
    result.iterations = opt.iterations;
    result.evaluations = opt.evaluations;
    for (const auto& s : problem.scalars)
        result.scalar_values[s.name] = store[store.slice(s.name).offset];

    // mean absolute error against the exact solution on the evaluation grid
    result.eval_per_dim = config.eval_per_dim.value_or(problem.grids.eval_per_dim);
    if (problem.has_exact()) {
        const auto grid = eval_grid(problem, result.eval_per_dim);
        double err_u = 0.0;
        std::vector<double> err_x(problem.states, 0.0);
        for (const auto& p : grid) {
            err_u += std::abs(result.predict_control(p) - problem.exact_control.eval_at(p));
            for (int s = 0; s < problem.states; ++s)
                err_x[s] += std::abs(result.predict_state(s, p) - problem.exact_states[s].eval_at(p));
        }
        result.mae_control = err_u / grid.size();
        for (int s = 0; s < problem.states; ++s) result.mae_states.push_back(err_x[s] / grid.size());
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

}  // namespace kanoc
