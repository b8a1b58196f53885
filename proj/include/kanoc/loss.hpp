#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kanoc/caputo.hpp"
#include "kanoc/networks.hpp"
#include "kanoc/problem.hpp"
#include "kanoc/quadrature.hpp"
#include "kanoc/tape.hpp"

namespace kanoc {

/// One evaluation of the four-term physics-informed loss. The penalty terms
/// are mean squared residuals (per equation, pooled over collocation points),
/// so their scale is independent of the grid sizes.
struct LossBreakdown {
    double total = 0.0;
    double cost = 0.0;         // quadrature approximation of the cost functional
    double residual = 0.0;     // mean squared dynamics residual, summed over equations
    double boundary = 0.0;     // mean squared boundary/initial mismatch
    double observation = 0.0;  // mean squared observation mismatch
    int iteration = 0;
};

/// Builds the differentiable loss graph for a problem once, then serves
/// loss/gradient evaluations for the optimizer by re-running the tape.
///
/// Network evaluations are shared where the grids coincide: multi-dimensional
/// problems collocate the dynamics on the cost quadrature nodes, fractional
/// problems use their own equidistant grid for the operational matrix, and
/// Volterra terms get per-row inner nodes.
class LossAssembler {
public:
    struct Options {
        int quad_order = 0;      // 0 = problem default
        int frac_grid = 0;
        int volterra_order = 0;
    };

    LossAssembler(const ControlProblem& problem, std::vector<Network*> nets,
                  ParameterStore& store, Options opts);

    std::size_t param_count() const { return store_.size(); }

    /// Loss and exact parameter gradient at x (assigns x into the store).
    /// Throws on a non-finite loss, naming the offending term and point.
    double eval(std::span<const double> x, std::span<double> grad);

    /// Loss terms only (no gradient). Same finiteness contract.
    LossBreakdown breakdown(std::span<const double> x);

    /// Terms of the most recent eval()/breakdown().
    LossBreakdown last() const { return last_; }

    const TensorRule& cost_rule() const { return *cost_rule_; }
    const ControlProblem& problem() const { return problem_; }
    Tape& tape() { return tape_; }
    Var total_var() const { return total_; }
    const CaputoMatrix* caputo_matrix() const { return caputo_.empty() ? nullptr : caputo_.front().get(); }

private:
    struct Batch {
        std::vector<std::vector<double>> coords;
        std::vector<std::vector<Var>> coord_vars;  // per point
        std::vector<Var> control;                  // per point (may be empty)
        std::vector<std::vector<Var>> states;      // [state][point]
    };

    Var scaled_input(Var coord, int dim);
    Batch build_batch(const std::vector<std::vector<double>>& points, bool want_control,
                      const std::vector<bool>& want_states);
    void build();
    LossBreakdown read_terms() const;
    void ensure_finite() const;
    [[noreturn]] void report_non_finite() const;

    const ControlProblem& problem_;
    std::vector<Network*> nets_;  // control first, then one per state
    ParameterStore& store_;
    Options opts_;

    Tape tape_;
    std::unique_ptr<TensorRule> cost_rule_;
    std::vector<std::shared_ptr<CaputoMatrix>> caputo_;  // per fractional residual
    std::vector<std::unique_ptr<VolterraOperator>> volterra_;

    Var total_{}, term_cost_{}, term_res_{}, term_bnd_{}, term_obs_{};
    LossBreakdown last_;

    // diagnostics: first offending component when the loss turns non-finite
    struct Component {
        Var var;
        std::string term;
        std::vector<double> point;
    };
    std::vector<Component> components_;
};

/// Least-squares fit of one network to a target function on a dense uniform
/// grid over the problem box (used to preload exact-solution interpolants).
void fit_network_to(Network& net, ParameterStore& store, const Expr& target,
                    std::span<const double> lo, std::span<const double> hi, int points_per_dim,
                    int max_iterations);

}  // namespace kanoc
