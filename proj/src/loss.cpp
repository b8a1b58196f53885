#include "kanoc/loss.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "kanoc/lbfgs.hpp"

namespace kanoc {

namespace {

/// All points of a tensor mesh given per-dimension node lists.
std::vector<std::vector<double>> mesh_points(const std::vector<std::vector<double>>& axes) {
    std::vector<std::vector<double>> out;
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size();
    out.reserve(total);
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t i = 0; i < total; ++i) {
        std::vector<double> p(axes.size());
        for (std::size_t d = 0; d < axes.size(); ++d) p[d] = axes[d][idx[d]];
        out.push_back(std::move(p));
        for (int d = static_cast<int>(axes.size()) - 1; d >= 0; --d) {
            if (++idx[d] < axes[d].size()) break;
            idx[d] = 0;
        }
    }
    return out;
}

}  // namespace

LossAssembler::LossAssembler(const ControlProblem& problem, std::vector<Network*> nets,
                             ParameterStore& store, Options opts)
    : problem_(problem), nets_(std::move(nets)), store_(store), opts_(opts) {
    if (nets_.size() != static_cast<std::size_t>(problem_.states) + 1)
        throw std::invalid_argument("LossAssembler: need one network per unknown function");
    if (opts_.quad_order <= 0) opts_.quad_order = problem_.grids.quad_order;
    if (opts_.frac_grid <= 0) opts_.frac_grid = problem_.grids.frac_grid;
    if (opts_.volterra_order <= 0) opts_.volterra_order = problem_.grids.volterra_order;
    build();
}

Var LossAssembler::scaled_input(Var coord, int dim) {
    const double lo = problem_.lo[dim], hi = problem_.hi[dim];
    return coord * (2.0 / (hi - lo)) - (hi + lo) / (hi - lo);
}

LossAssembler::Batch LossAssembler::build_batch(const std::vector<std::vector<double>>& points,
                                                bool want_control,
                                                const std::vector<bool>& want_states) {
    Batch b;
    b.coords = points;
    b.coord_vars.resize(points.size());
    if (want_control) b.control.resize(points.size());
    b.states.assign(problem_.states, {});
    for (int s = 0; s < problem_.states; ++s)
        if (want_states[s]) b.states[s].resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<Var> coords, scaled;
        for (int d = 0; d < problem_.dim; ++d) {
            coords.push_back(tape_.input(points[i][d]));
            scaled.push_back(scaled_input(coords.back(), d));
        }
        b.coord_vars[i] = coords;
        if (want_control) b.control[i] = nets_[0]->build_scalar(tape_, scaled, store_);
        for (int s = 0; s < problem_.states; ++s)
            if (want_states[s]) b.states[s][i] = nets_[s + 1]->build_scalar(tape_, scaled, store_);
    }
    return b;
}

void LossAssembler::build() {
    const int dim = problem_.dim;

    // cost quadrature rule over the box
    std::vector<QuadratureRule> rules(dim, legendre_rule(opts_.quad_order));
    cost_rule_ = std::make_unique<TensorRule>(rules, problem_.lo, problem_.hi);

    const bool fractional = std::any_of(problem_.residuals.begin(), problem_.residuals.end(),
                                        [](const ResidualSpec& r) { return r.caputo.has_value(); });

    // collocation rows for the dynamics residuals
    std::vector<std::vector<double>> rows;
    if (fractional) {
        const int m = opts_.frac_grid;
        if (m < 2) throw std::invalid_argument("LossAssembler: fractional grid too small");
        for (int j = 0; j < m; ++j)
            rows.push_back({problem_.lo[0] + (problem_.hi[0] - problem_.lo[0]) * j / (m - 1)});
    } else {
        rows.reserve(cost_rule_->count());
        for (std::size_t i = 0; i < cost_rule_->count(); ++i) {
            auto p = cost_rule_->point(i);
            rows.emplace_back(p.begin(), p.end());
        }
    }

    const std::vector<bool> all_states(problem_.states, true);
    Batch row_batch = build_batch(rows, true, all_states);

    // tangent maps per dimension for the derivative atoms in the residuals
    int max_order[3] = {0, 0, 0};
    for (const auto& r : problem_.residuals) {
        auto scan = [&](const Expr& e) {
            e.visit([&](const ExprNode& n) {
                if (n.kind == ExprKind::kPartial) max_order[n.b] = std::max(max_order[n.b], n.c);
            });
        };
        if (!r.lhs.empty()) scan(r.lhs);
        scan(r.rhs);
    }
    // all first-order passes are bounded by the base region so they never walk
    // another dimension's tangent nodes; each second-order pass then extends
    // only over its own first-order region
    std::vector<std::int32_t> first[3], second[3];
    std::int32_t first_end[3] = {0, 0, 0};
    const auto base_end = static_cast<std::int32_t>(tape_.size());
    auto seeds_of = [&](int d) {
        std::vector<Var> seeds;
        seeds.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) seeds.push_back(row_batch.coord_vars[i][d]);
        return seeds;
    };
    for (int d = 0; d < dim; ++d) {
        if (max_order[d] == 0) continue;
        first[d] = tape_.pushforward(seeds_of(d), base_end);
        first_end[d] = static_cast<std::int32_t>(tape_.size());
    }
    for (int d = 0; d < dim; ++d) {
        if (max_order[d] < 2) continue;
        second[d] = tape_.pushforward(seeds_of(d), first_end[d], &first[d]);
    }

    // cost batch (reuses the rows when they coincide with the quadrature grid)
    Batch cost_batch;
    const Batch* cost_pts = nullptr;
    if (fractional) {
        std::vector<std::vector<double>> cpts;
        for (std::size_t i = 0; i < cost_rule_->count(); ++i) {
            auto p = cost_rule_->point(i);
            cpts.emplace_back(p.begin(), p.end());
        }
        cost_batch = build_batch(cpts, true, all_states);
        cost_pts = &cost_batch;
    } else {
        cost_pts = &row_batch;
    }

    // Volterra operators: one per integral atom, applied across all rows
    struct VolterraSlot {
        const ExprNode* key;
        std::vector<Var> per_row;
    };
    std::vector<VolterraSlot> vslots;
    for (const auto& r : problem_.residuals) {
        r.rhs.visit([&](const ExprNode& n) {
            if (n.kind != ExprKind::kVolterra) return;
            if (dim != 1)
                throw std::invalid_argument("LossAssembler: integral terms need a 1D domain");
            std::vector<double> row_times(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) row_times[i] = rows[i][0];
            Expr::EvalCtx kctx;
            double outer = 0.0;
            const Expr& kernel = n.lhs;
            kctx.coords = {&outer, 1};
            auto kernel_fn = [&](double t, double s) {
                outer = t;
                kctx.inner = s;
                return kernel.eval(kctx);
            };
            volterra_.push_back(std::make_unique<VolterraOperator>(kernel_fn, problem_.lo[0],
                                                                   row_times, opts_.volterra_order));
            const VolterraOperator& op = *volterra_.back();
            // evaluate the state at every inner node
            std::vector<std::vector<double>> inner_pts;
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (double s : op.inner_points(i)) inner_pts.push_back({s});
            std::vector<bool> want(problem_.states, false);
            want[n.a] = true;
            Batch inner = build_batch(inner_pts, false, want);
            vslots.push_back({&n, op.apply(tape_, inner.states[n.a])});
        });
    }

    // Caputo operational matrices and their row applications
    std::vector<std::vector<Var>> caputo_rows(problem_.residuals.size());
    if (fractional) {
        std::vector<double> grid(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) grid[i] = rows[i][0];
        for (std::size_t ri = 0; ri < problem_.residuals.size(); ++ri) {
            const auto& r = problem_.residuals[ri];
            if (!r.caputo) continue;
            std::shared_ptr<CaputoMatrix> mat;
            for (const auto& m : caputo_)
                if (m->alpha() == r.caputo->alpha) mat = m;
            if (!mat) {
                mat = std::make_shared<CaputoMatrix>(r.caputo->alpha, grid);
                caputo_.push_back(mat);
            }
            caputo_rows[ri] = mat->apply(tape_, row_batch.states[r.caputo->state]);
        }
    }

    auto scalar_lookup = [&](const std::string& name) -> Var {
        return tape_.param(store_, store_.slice(name).offset);
    };

    // dynamics residuals: per-equation mean over the collocation rows, summed
    // across equations (matching the reference stack's MSE-per-tensor shape)
    std::vector<Var> squares;
    std::vector<double> square_coeffs;
    for (std::size_t ri = 0; ri < problem_.residuals.size(); ++ri) {
        const auto& spec = problem_.residuals[ri];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Expr::BuildCtx ctx;
            ctx.coords = row_batch.coord_vars[i];
            std::vector<Var> st(problem_.states);
            for (int s = 0; s < problem_.states; ++s) st[s] = row_batch.states[s][i];
            ctx.states = st;
            ctx.control = row_batch.control[i];
            ctx.scalar = scalar_lookup;
            ctx.partial = [&](int s, int d, int order) {
                Var v = tape_.tangent(first[d], row_batch.states[s][i]);
                if (order == 2) v = tape_.tangent(second[d], v);
                return v;
            };
            ctx.volterra = [&](const Expr& kernel, int) -> Var {
                for (const auto& slot : vslots)
                    if (slot.key == &kernel.node() ||
                        (slot.key->lhs.empty() == false && &slot.key->lhs.node() == &kernel.node()))
                        return slot.per_row[i];
                throw std::logic_error("LossAssembler: unresolved integral term");
            };
            const Var lhs = spec.caputo ? caputo_rows[ri][i] : spec.lhs.build(tape_, ctx);
            const Var r = lhs - spec.rhs.build(tape_, ctx);
            const Var r2 = r * r;
            squares.push_back(r2);
            square_coeffs.push_back(1.0 / static_cast<double>(rows.size()));
            components_.push_back({r2, "residual", rows[i]});
        }
    }
    term_res_ = squares.empty() ? tape_.constant(0.0) : tape_.lin_comb(squares, square_coeffs);

    // cost functional
    {
        std::vector<Var> integrand(cost_rule_->count());
        for (std::size_t i = 0; i < cost_rule_->count(); ++i) {
            Expr::BuildCtx ctx;
            ctx.coords = cost_pts->coord_vars[i];
            std::vector<Var> st(problem_.states);
            for (int s = 0; s < problem_.states; ++s) st[s] = cost_pts->states[s][i];
            ctx.states = st;
            ctx.control = cost_pts->control[i];
            ctx.scalar = scalar_lookup;
            integrand[i] = problem_.cost.build(tape_, ctx);
            components_.push_back({integrand[i], "cost", cost_pts->coords[i]});
        }
        term_cost_ = integrate_cost(tape_, *cost_rule_, integrand);
        if (!problem_.terminal.empty()) {
            // terminal cost over the states at the upper corner of the box
            std::vector<std::vector<double>> corner = {problem_.hi};
            Batch cb = build_batch(corner, true, std::vector<bool>(problem_.states, true));
            Expr::BuildCtx ctx;
            ctx.coords = cb.coord_vars[0];
            std::vector<Var> st(problem_.states);
            for (int s = 0; s < problem_.states; ++s) st[s] = cb.states[s][0];
            ctx.states = st;
            ctx.control = cb.control[0];
            ctx.scalar = scalar_lookup;
            const Var g = problem_.terminal.build(tape_, ctx);
            components_.push_back({g, "terminal", problem_.hi});
            term_cost_ = term_cost_ + g;
        }
    }

    // boundary and initial conditions on face grids
    {
        std::vector<Var> squares_b;
        for (const auto& c : problem_.conditions) {
            std::vector<std::vector<double>> axes;
            for (int d = 0; d < dim; ++d) {
                if (d == c.fixed_dim)
                    axes.push_back({c.fixed_value});
                else
                    axes.push_back(cost_rule_->axis(d));
            }
            std::vector<bool> want(problem_.states, false);
            want[c.state] = true;
            Batch face = build_batch(mesh_points(axes), false, want);
            for (std::size_t i = 0; i < face.coords.size(); ++i) {
                const double target = c.target.eval_at(face.coords[i]);
                const Var r = face.states[c.state][i] - tape_.constant(target);
                const Var r2 = r * r;
                squares_b.push_back(r2);
                components_.push_back({r2, "boundary", face.coords[i]});
            }
        }
        // pooled mean over every boundary/initial collocation point
        const std::vector<double> inv_b(squares_b.size(), 1.0 / std::max<std::size_t>(1, squares_b.size()));
        term_bnd_ = squares_b.empty() ? tape_.constant(0.0) : tape_.lin_comb(squares_b, inv_b);
    }

    // observations
    {
        std::vector<Var> squares_o;
        for (const auto& o : problem_.observations) {
            std::vector<bool> want(problem_.states, false);
            want[o.state] = true;
            Batch pt = build_batch({o.point}, false, want);
            const Var r = pt.states[o.state][0] - tape_.constant(o.value);
            const Var r2 = r * r;
            squares_o.push_back(r2);
            components_.push_back({r2, "observation", o.point});
        }
        const std::vector<double> inv_o(squares_o.size(), 1.0 / std::max<std::size_t>(1, squares_o.size()));
        term_obs_ = squares_o.empty() ? tape_.constant(0.0) : tape_.lin_comb(squares_o, inv_o);
    }

    total_ = tape_.constant(problem_.weights.cost) * term_cost_ +
             tape_.constant(problem_.weights.residual) * term_res_ +
             tape_.constant(problem_.weights.boundary) * term_bnd_ +
             tape_.constant(problem_.weights.observation) * term_obs_;
}

LossBreakdown LossAssembler::read_terms() const {
    LossBreakdown b;
    b.total = tape_.value(total_);
    b.cost = tape_.value(term_cost_);
    b.residual = tape_.value(term_res_);
    b.boundary = tape_.value(term_bnd_);
    b.observation = tape_.value(term_obs_);
    return b;
}

void LossAssembler::ensure_finite() const {
    if (!std::isfinite(tape_.value(total_))) report_non_finite();
}

void LossAssembler::report_non_finite() const {
    for (const auto& c : components_) {
        if (!std::isfinite(tape_.value(c.var))) {
            char buf[256];
            std::string pt;
            for (double x : c.point) {
                char b2[32];
                std::snprintf(b2, sizeof b2, "%s%.6g", pt.empty() ? "" : ", ", x);
                pt += b2;
            }
            std::snprintf(buf, sizeof buf, "loss is not finite: %s term at point (%s)",
                          c.term.c_str(), pt.c_str());
            throw std::runtime_error(buf);
        }
    }
    throw std::runtime_error("loss is not finite (no single component identified)");
}

double LossAssembler::eval(std::span<const double> x, std::span<double> grad) {
    store_.assign(x);
    tape_.forward(store_);
    ensure_finite();
    last_ = read_terms();
    tape_.param_gradient(total_, grad);
    return last_.total;
}

LossBreakdown LossAssembler::breakdown(std::span<const double> x) {
    store_.assign(x);
    tape_.forward(store_);
    ensure_finite();
    last_ = read_terms();
    return last_;
}

void fit_network_to(Network& net, ParameterStore& store, const Expr& target,
                    std::span<const double> lo, std::span<const double> hi, int points_per_dim,
                    int max_iterations) {
    const int dim = static_cast<int>(lo.size());
    Tape tape;
    std::vector<Var> sq_errs;
    std::vector<std::vector<double>> axes(dim);
    for (int d = 0; d < dim; ++d)
        for (int j = 0; j < points_per_dim; ++j)
            axes[d].push_back(lo[d] + (hi[d] - lo[d]) * j / (points_per_dim - 1));
    for (const auto& p : mesh_points(axes)) {
        std::vector<Var> scaled;
        for (int d = 0; d < dim; ++d)
            scaled.push_back(tape.constant(2.0 * (p[d] - lo[d]) / (hi[d] - lo[d]) - 1.0));
        const Var out = net.build_scalar(tape, scaled, store);
        const Var r = out - tape.constant(target.eval_at(p));
        sq_errs.push_back(r * r);
    }
    const std::vector<double> w(sq_errs.size(), 1.0 / sq_errs.size());
    const Var mse = tape.lin_comb(sq_errs, w);

    std::vector<double> x0 = store.flatten();
    LbfgsParams params;
    params.max_iterations = max_iterations;
    auto fn = [&](std::span<const double> x, std::span<double> grad) {
        store.assign(x);
        tape.forward(store);
        tape.param_gradient(mse, grad);
        return tape.value(mse);
    };
    LbfgsResult res = lbfgs_minimize(fn, std::move(x0), params);
    store.assign(res.x);
}

}  // namespace kanoc
