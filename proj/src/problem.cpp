#include "kanoc/problem.hpp"

#include <cmath>
#include <stdexcept>

#include "kanoc/caputo.hpp"
#include "kanoc/quadrature.hpp"
#include "kanoc/rng.hpp"

namespace kanoc {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

bool ControlProblem::has_exact() const {
    if (exact_control.empty() || static_cast<int>(exact_states.size()) != states) return false;
    for (const auto& e : exact_states)
        if (e.empty()) return false;
    return true;
}

void ControlProblem::validate() const {
    if (dim < 1 || dim > 3) throw std::invalid_argument(name + ": dimension must be 1..3");
    if (states < 1) throw std::invalid_argument(name + ": need at least one state");
    if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim)
        throw std::invalid_argument(name + ": domain bounds do not match the dimension");
    for (int d = 0; d < dim; ++d)
        if (!(lo[d] < hi[d])) throw std::invalid_argument(name + ": empty domain dimension");
    if (weights.cost < 0 || weights.residual < 0 || weights.boundary < 0 || weights.observation < 0)
        throw std::invalid_argument(name + ": loss weights must be nonnegative");
    if (cost.empty()) throw std::invalid_argument(name + ": missing cost integrand");
    for (const auto& r : residuals) {
        if (r.caputo) {
            if (!(r.caputo->alpha > 0.0 && r.caputo->alpha < 1.0))
                throw std::invalid_argument(name + ": Caputo order must be in (0,1)");
            if (r.caputo->state < 0 || r.caputo->state >= states)
                throw std::invalid_argument(name + ": Caputo state index out of range");
            if (dim != 1) throw std::invalid_argument(name + ": Caputo dynamics need a 1D domain");
        } else if (r.lhs.empty()) {
            throw std::invalid_argument(name + ": residual without a left side");
        }
        auto check_refs = [&](const Expr& e) {
            e.visit([&](const ExprNode& n) {
                if (n.kind == ExprKind::kState && (n.a < 0 || n.a >= states))
                    throw std::invalid_argument(name + ": state index out of range in expression");
                if (n.kind == ExprKind::kPartial && (n.a < 0 || n.a >= states || n.b < 0 || n.b >= dim))
                    throw std::invalid_argument(name + ": derivative atom out of range");
                if (n.kind == ExprKind::kCoord && (n.a < 0 || n.a >= dim))
                    throw std::invalid_argument(name + ": coordinate index out of range");
            });
        };
        if (!r.lhs.empty()) check_refs(r.lhs);
        check_refs(r.rhs);
    }
    for (const auto& c : conditions) {
        if (c.fixed_dim < 0 || c.fixed_dim >= dim)
            throw std::invalid_argument(name + ": condition face dimension out of range");
        if (c.fixed_value != lo[c.fixed_dim] && c.fixed_value != hi[c.fixed_dim])
            throw std::invalid_argument(name + ": condition point is not on the boundary");
        if (c.state < 0 || c.state >= states)
            throw std::invalid_argument(name + ": condition state index out of range");
        if (c.target.empty()) throw std::invalid_argument(name + ": condition without a target");
    }
    for (const auto& o : observations) {
        if (static_cast<int>(o.point.size()) != dim)
            throw std::invalid_argument(name + ": observation point dimension mismatch");
        for (int d = 0; d < dim; ++d)
            if (o.point[d] < lo[d] || o.point[d] > hi[d])
                throw std::invalid_argument(name + ": observation point outside the domain");
        if (o.state < 0 || o.state >= states)
            throw std::invalid_argument(name + ": observation state index out of range");
    }
    for (const auto& s : scalars) {
        bool used = false;
        for (const auto& r : residuals) {
            auto scan = [&](const Expr& e) {
                e.visit([&](const ExprNode& n) {
                    if (n.kind == ExprKind::kScalar && n.name == s.name) used = true;
                });
            };
            if (!r.lhs.empty()) scan(r.lhs);
            scan(r.rhs);
        }
        if (!used)
            throw std::invalid_argument(name + ": scalar '" + s.name +
                                        "' does not appear in any residual");
    }
}

// -------------------------------------------------------------- builtins

namespace {

ControlProblem make_frac_forward() {
    ControlProblem p;
    p.name = "frac_forward";
    p.dim = 1;
    p.lo = {0.0};
    p.hi = {1.0};
    p.states = 2;
    const Expr t = Expr::coord(0);
    const Expr x1 = Expr::state(0), x2 = Expr::state(1), u = Expr::control();
    const double c1 = 0.75 * std::sqrt(kPi);      // 3*sqrt(pi)/4
    const double c2 = 15.0 * std::sqrt(kPi) / 16.0;
    p.cost = sq(x1 - 1.0 - pow(t, 1.5)) + sq(x2 - pow(t, 2.5)) + sq(u - c1 * t + pow(t, 2.5));
    p.residuals.push_back({CaputoLhs{0.5, 0}, {}, x2 + u});
    p.residuals.push_back({CaputoLhs{0.5, 1}, {}, x1 + c2 * sq(t) - pow(t, 1.5) - 1.0});
    p.conditions.push_back({0, 0.0, 0, Expr::constant(1.0)});
    p.conditions.push_back({0, 0.0, 1, Expr::constant(0.0)});
    p.weights.cost = 1e-1;
    p.grids = {30, 2000, 20, 1000};
    p.exact_control = c1 * t - pow(t, 2.5);
    p.exact_states = {1.0 + pow(t, 1.5), pow(t, 2.5)};
    return p;
}

ControlProblem make_frac_inverse() {
    ControlProblem p = make_frac_forward();
    p.name = "frac_inverse";
    p.conditions.clear();
    const Expr t = Expr::coord(0);
    const Expr x1 = Expr::state(0);
    const double c2 = 15.0 * std::sqrt(kPi) / 16.0;
    p.scalars.push_back({"kappa", 1.0, c2});
    p.residuals[1].rhs = x1 + Expr::scalar("kappa") * sq(t) - pow(t, 1.5) - 1.0;
    p.observations = generate_observations(p, p.exact_states, 20, 0.05, 1234);
    // the noisy observations only need to anchor the unpinned trajectory
    // offset and kappa; a weak weight keeps them from dragging the states
    // off the clean tracking target
    p.weights.observation = 0.01;
    return p;
}

ControlProblem make_ide() {
    ControlProblem p;
    p.name = "ide";
    p.dim = 1;
    p.lo = {0.0};
    p.hi = {1.0};
    p.states = 1;
    const Expr t = Expr::coord(0);
    const Expr s = Expr::inner_var();
    const Expr x = Expr::state(0), u = Expr::control();
    p.cost = sq(x - exp(sq(t))) + sq(u - 2.0 * t - 1.0);
    const Expr kernel = (2.0 * sq(t) + t) * exp(s * t - sq(s));
    p.residuals.push_back({std::nullopt, Expr::partial(0, 0, 1), u - x + Expr::volterra(kernel, 0)});
    p.conditions.push_back({0, 0.0, 0, Expr::constant(1.0)});
    p.weights.cost = 1e-3;
    p.grids = {30, 0, 20, 1000};
    p.exact_control = 2.0 * t + 1.0;
    p.exact_states = {exp(sq(t))};
    return p;
}

ControlProblem make_pde2d() {
    ControlProblem p;
    p.name = "pde2d";
    p.dim = 2;  // (z, t)
    p.lo = {0.0, 0.0};
    p.hi = {1.0, 1.0};
    p.states = 1;
    const Expr z = Expr::coord(0), t = Expr::coord(1);
    const Expr x = Expr::state(0), u = Expr::control();
    p.cost = sq(x - pow(t, 4.0) * sin(z)) + sq(u - pow(t, 3.0) * cos(z));
    const Expr rhs = cos(x) + 2.0 * sin(z) * Expr::partial(0, 0, 1) + Expr::partial(0, 0, 2) +
                     6.0 * sin(z) * u - cos(pow(t, 4.0) * sin(z)) -
                     pow(t, 3.0) * (t * sin(2.0 * z) - t * sin(z) + 3.0 * sin(2.0 * z)) +
                     4.0 * sin(z) * pow(t, 3.0);
    p.residuals.push_back({std::nullopt, Expr::partial(0, 1, 1), rhs});
    p.conditions.push_back({1, 0.0, 0, Expr::constant(0.0)});  // x(z, 0) = 0
    p.conditions.push_back({0, 0.0, 0, Expr::constant(0.0)});  // x(0, t) = 0
    p.weights.cost = 1e-6;
    p.grids = {25, 0, 20, 100};
    p.exact_control = pow(t, 3.0) * cos(z);
    p.exact_states = {pow(t, 4.0) * sin(z)};
    return p;
}

ControlProblem make_heat2d() {
    ControlProblem p;
    p.name = "heat2d";
    p.dim = 3;  // (z1, z2, t)
    p.lo = {0.0, 0.0, 0.0};
    p.hi = {kPi, kPi, kPi};
    p.states = 1;
    const Expr z1 = Expr::coord(0), z2 = Expr::coord(1), t = Expr::coord(2);
    const Expr x = Expr::state(0), u = Expr::control();
    const Expr exact_x = sin(z1) * sin(z2) * exp(-t);
    const Expr exact_u = exp((z1 + z2 - t) / 2.0);
    p.cost = sq(x - exact_x) + sq(u - exact_u);
    // source chosen so the exact pair solves dx/dt = laplacian(x) + u + source
    const Expr source = exact_x - exact_u;
    p.residuals.push_back(
        {std::nullopt, Expr::partial(0, 2, 1),
         Expr::partial(0, 0, 2) + Expr::partial(0, 1, 2) + u + source});
    p.conditions.push_back({2, 0.0, 0, sin(z1) * sin(z2)});  // initial temperature
    p.conditions.push_back({0, 0.0, 0, exact_x});
    p.conditions.push_back({0, kPi, 0, exact_x});
    p.conditions.push_back({1, 0.0, 0, exact_x});
    p.conditions.push_back({1, kPi, 0, exact_x});
    p.weights.cost = 1.0;
    p.grids = {10, 0, 20, 20};
    p.exact_control = exact_u;
    p.exact_states = {exact_x};
    return p;
}

}  // namespace

ControlProblem builtin_problem(const std::string& id) {
    ControlProblem p;
    if (id == "frac_forward")
        p = make_frac_forward();
    else if (id == "frac_inverse")
        p = make_frac_inverse();
    else if (id == "ide")
        p = make_ide();
    else if (id == "pde2d")
        p = make_pde2d();
    else if (id == "heat2d")
        p = make_heat2d();
    else
        throw std::invalid_argument("builtin_problem: unknown id '" + id + "'");
    p.validate();
    return p;
}

std::vector<Observation> generate_observations(const ControlProblem& problem,
                                               std::span<const Expr> exact_states, int n,
                                               double noise, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_observations: need n >= 1");
    if (noise < 0.0) throw std::invalid_argument("generate_observations: negative noise");
    if (static_cast<int>(exact_states.size()) != problem.states)
        throw std::invalid_argument("generate_observations: exact solution count mismatch");
    Rng rng(seed);
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(n) * problem.states);
    for (int i = 0; i < n; ++i) {
        std::vector<double> point(problem.dim);
        for (int d = 0; d < problem.dim; ++d)
            point[d] = rng.uniform(problem.lo[d], problem.hi[d]);
        for (int s = 0; s < problem.states; ++s) {
            const double exact = exact_states[s].eval_at(point);
            out.push_back({point, s, exact + noise * rng.normal()});
        }
    }
    return out;
}

// ------------------------------------------------- transcription check

namespace {

/// Numeric residual context on the exact solution at one point; derivative
/// atoms come from tangent graphs of the exact expressions.
double smooth_residual_at(const ControlProblem& p, const ResidualSpec& r,
                          std::span<const double> point) {
    Tape tape;
    std::vector<Var> coords;
    for (int d = 0; d < p.dim; ++d) coords.push_back(tape.input(point[d]));

    Expr::BuildCtx ctx;
    ctx.coords = coords;
    std::vector<Var> states;
    for (const auto& ex : p.exact_states) states.push_back(ex.build(tape, ctx));
    ctx.states = states;
    ctx.control = p.exact_control.build(tape, ctx);
    ctx.scalar = [&](const std::string& name) {
        for (const auto& s : p.scalars)
            if (s.name == name) return tape.constant(s.reference.value_or(s.initial));
        throw std::logic_error("unknown scalar " + name);
    };

    // first/second tangents of the exact states per dimension, on demand
    std::vector<std::vector<std::int32_t>> first(p.dim), second(p.dim);
    auto ensure_maps = [&](int dim, int order) {
        if (first[dim].empty()) {
            const Var seeds[] = {coords[dim]};
            first[dim] = tape.pushforward(seeds, static_cast<std::int32_t>(tape.size()));
        }
        if (order >= 2 && second[dim].empty()) {
            const Var seeds[] = {coords[dim]};
            second[dim] =
                tape.pushforward(seeds, static_cast<std::int32_t>(tape.size()), &first[dim]);
        }
    };
    ctx.partial = [&](int st, int dim, int order) {
        ensure_maps(dim, order);
        Var v = tape.tangent_or_zero(first[dim], states[st]);
        if (order == 2) v = tape.tangent_or_zero(second[dim], v);
        return v;
    };
    ctx.volterra = [&](const Expr& kernel, int st) {
        const double t = point[p.dim - 1];
        Expr::EvalCtx kctx;
        const double row[] = {t};
        kctx.coords = row;
        auto kernel_fn = [&](double /*outer*/, double s) {
            kctx.inner = s;
            return kernel.eval(kctx);
        };
        const double rows[] = {t};
        VolterraOperator op(kernel_fn, p.lo[0], rows, p.grids.volterra_order);
        std::vector<double> samples(op.inner_points(0).size());
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const double pt[] = {op.inner_points(0)[k]};
            samples[k] = p.exact_states[st].eval_at(pt);
        }
        return tape.constant(op.apply(samples)[0]);
    };

    const Var lhs = r.lhs.build(tape, ctx);
    const Var rhs = r.rhs.build(tape, ctx);
    return std::abs(tape.value(lhs) - tape.value(rhs));
}

double caputo_residual_max(const ControlProblem& p, const ResidualSpec& r) {
    const int m = p.grids.frac_grid;
    std::vector<double> grid(m);
    for (int j = 0; j < m; ++j)
        grid[j] = p.lo[0] + (p.hi[0] - p.lo[0]) * j / (m - 1);
    const CaputoMatrix mat(r.caputo->alpha, grid);
    std::vector<double> samples(m);
    for (int j = 0; j < m; ++j) {
        const double pt[] = {grid[j]};
        samples[j] = p.exact_states[r.caputo->state].eval_at(pt);
    }
    const std::vector<double> lhs = mat.apply(samples);
    double worst = 0.0;
    for (int j = 0; j < m; ++j) {
        const double pt[] = {grid[j]};
        Expr::EvalCtx ctx;
        ctx.coords = pt;
        ctx.state = [&](int s) { return p.exact_states[s].eval_at(pt); };
        ctx.control = [&] { return p.exact_control.eval_at(pt); };
        ctx.scalar = [&](const std::string& name) -> double {
            for (const auto& s : p.scalars)
                if (s.name == name) return s.reference.value_or(s.initial);
            throw std::logic_error("unknown scalar " + name);
        };
        worst = std::max(worst, std::abs(lhs[j] - r.rhs.eval(ctx)));
    }
    return worst;
}

}  // namespace

TranscriptionReport check_transcription(const ControlProblem& problem, int random_points,
                                        std::uint64_t seed) {
    if (!problem.has_exact())
        throw std::invalid_argument("check_transcription: problem has no exact solution");
    TranscriptionReport rep;
    Rng rng(seed);
    for (const auto& r : problem.residuals) {
        if (r.caputo) {
            rep.max_caputo_residual = std::max(rep.max_caputo_residual, caputo_residual_max(problem, r));
            continue;
        }
        for (int i = 0; i < random_points; ++i) {
            std::vector<double> point(problem.dim);
            for (int d = 0; d < problem.dim; ++d)
                point[d] = rng.uniform(problem.lo[d], problem.hi[d]);
            rep.max_smooth_residual =
                std::max(rep.max_smooth_residual, smooth_residual_at(problem, r, point));
        }
    }
    for (const auto& c : problem.conditions) {
        for (int i = 0; i < 20; ++i) {
            std::vector<double> point(problem.dim);
            for (int d = 0; d < problem.dim; ++d)
                point[d] = rng.uniform(problem.lo[d], problem.hi[d]);
            point[c.fixed_dim] = c.fixed_value;
            const double got = problem.exact_states[c.state].eval_at(point);
            const double want = c.target.eval_at(point);
            rep.max_condition_error = std::max(rep.max_condition_error, std::abs(got - want));
        }
    }
    return rep;
}

}  // namespace kanoc
