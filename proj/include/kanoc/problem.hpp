#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kanoc/expr.hpp"

namespace kanoc {

/// Per-term weights of the physics-informed loss.
struct Weights {
    double cost = 1.0;         // weight on the quadrature cost functional
    double residual = 1.0;     // weight on squared dynamics residuals
    double boundary = 1.0;     // weight on squared boundary/initial mismatches
    double observation = 1.0;  // weight on squared observation mismatches
};

/// Fractional left side: Caputo derivative of one state.
struct CaputoLhs {
    double alpha = 0.5;
    int state = 0;
};

/// One dynamics equation, lhs = rhs. The left side is either a Caputo
/// derivative (applied through the operational matrix) or an expression that
/// may contain derivative atoms (d/dt, d/dz, d^2/dz^2) handled by autodiff.
struct ResidualSpec {
    std::optional<CaputoLhs> caputo;
    Expr lhs;  // unused when caputo is set
    Expr rhs;
};

/// Dirichlet data on one face of the box: the coordinate `fixed_dim` is
/// pinned to `fixed_value` (which must be that dimension's lo or hi), and the
/// target expression is evaluated over the full coordinate vector. A 1D
/// initial condition is the face t = t0.
struct FaceCondition {
    int fixed_dim = 0;
    double fixed_value = 0.0;
    int state = 0;
    Expr target;
};

struct Observation {
    std::vector<double> point;
    int state = 0;
    double value = 0.0;
};

struct TrainableScalar {
    std::string name;
    double initial = 0.0;
    std::optional<double> reference;  // known true value, when there is one
};

/// Grid sizes a problem trains with by default (all overridable per run).
struct GridDefaults {
    int quad_order = 30;    // cost/collocation nodes per dimension
    int frac_grid = 0;      // M for the Caputo grid (fractional problems)
    int volterra_order = 20;
    int eval_per_dim = 1000;  // metrics/export grid resolution
};

/// Declarative optimal control problem on a box domain. The last coordinate
/// is time by convention.
struct ControlProblem {
    std::string name;
    int dim = 1;
    std::vector<double> lo, hi;
    int states = 1;
    Expr cost;                    // running cost over states, control, coords
    Expr terminal;                // over states at the upper corner; empty = 0
    std::vector<ResidualSpec> residuals;
    std::vector<FaceCondition> conditions;
    std::vector<Observation> observations;
    std::vector<TrainableScalar> scalars;
    Weights weights;
    GridDefaults grids;
    Expr exact_control;           // optional exact solutions for evaluation
    std::vector<Expr> exact_states;

    bool has_exact() const;
    void validate() const;  // throws on any violated structural invariant
};

/// The bundled benchmark problems:
///   frac_forward  - two coupled Caputo(0.5) states with initial conditions
///   frac_inverse  - frac_forward without initial data; unknown coefficient
///                   kappa and 20 noisy state observations
///   ide           - integro-differential constraint with a Volterra term
///   pde2d         - 1+1D PDE with first/second space derivatives
///   heat2d        - 2+1D heat equation with a source and distributed control
ControlProblem builtin_problem(const std::string& id);

/// n observation points uniform in the box; every state is observed at every
/// point with target exact(point) + noise * g, g ~ N(0,1). Reproducible for a
/// fixed seed.
std::vector<Observation> generate_observations(const ControlProblem& problem,
                                               std::span<const Expr> exact_states, int n,
                                               double noise, std::uint64_t seed);

/// Evaluates every residual and condition on the exact solution. Smooth
/// residuals use autodiff derivatives of the exact expressions at random
/// interior points; Caputo residuals use the operational matrix on its grid
/// (so their error is the L1 discretization error); Volterra terms use the
/// inner quadrature. Used to validate that the bundled dynamics match their
/// exact solutions.
struct TranscriptionReport {
    double max_smooth_residual = 0.0;
    double max_caputo_residual = 0.0;
    double max_condition_error = 0.0;
};
TranscriptionReport check_transcription(const ControlProblem& problem, int random_points = 100,
                                        std::uint64_t seed = 99);

/// Loads a problem from the plain-text format documented in the README.
ControlProblem load_problem_config(const std::string& path);
ControlProblem parse_problem_config(const std::string& text, const std::string& origin = "<config>");

}  // namespace kanoc
