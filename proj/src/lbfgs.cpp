#include "kanoc/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace kanoc {

const char* to_string(LbfgsStatus s) {
    switch (s) {
        case LbfgsStatus::kConverged: return "converged";
        case LbfgsStatus::kMaxIterations: return "max_iterations";
        case LbfgsStatus::kStalled: return "stalled";
        case LbfgsStatus::kLineSearchFailed: return "line_search_failed";
    }
    return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Minimizer of the cubic through (x1,f1,g1), (x2,f2,g2), clipped to bounds;
/// falls back to bisection when the cubic has no real minimum (e.g. around
/// +inf trial values).
double cubic_interpolate(double x1, double f1, double g1, double x2, double f2, double g2,
                         double lo, double hi) {
    const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    const double d2sq = d1 * d1 - g1 * g2;
    if (std::isfinite(d2sq) && d2sq >= 0.0) {
        const double d2 = std::sqrt(d2sq);
        double min_pos;
        if (x1 <= x2)
            min_pos = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2));
        else
            min_pos = x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2));
        if (std::isfinite(min_pos)) return std::min(std::max(min_pos, lo), hi);
    }
    return 0.5 * (lo + hi);
}

struct LineSearchOutcome {
    double f = kInf;
    double t = 0.0;
    int evals = 0;
    bool wolfe = false;
};

/// Strong-Wolfe search along d from x (f0, g0, gtd0 at t=0). On return g
/// holds the gradient at the returned point.
LineSearchOutcome strong_wolfe(const LossGradFn& fn, std::span<const double> x,
                               std::span<const double> d, double t, double f0,
                               std::span<const double> g0, double gtd0, const LbfgsParams& p,
                               std::vector<double>& g, std::vector<double>& xt) {
    const std::size_t n = x.size();
    const double d_norm = max_abs(d);
    LineSearchOutcome out;

    auto eval = [&](double step) -> std::pair<double, double> {  // f, gtd
        for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + step * d[i];
        double f = fn(xt, g);
        ++out.evals;
        if (!std::isfinite(f) || !all_finite(g)) return {kInf, kInf};
        return {f, dot(g, d)};
    };

    auto [f_new, gtd_new] = eval(t);
    std::vector<double> g_new = g;

    // bracketing phase
    double t_prev = 0.0, f_prev = f0, gtd_prev = gtd0;
    std::vector<double> g_prev(g0.begin(), g0.end());
    double br_t[2], br_f[2], br_gtd[2];
    std::vector<double> br_g[2];
    bool done = false;
    int ls_iter = 0;
    bool bracketed = false;
    while (ls_iter < p.max_line_search) {
        if (f_new > f0 + p.c1 * t * gtd0 || (ls_iter > 1 && f_new >= f_prev)) {
            br_t[0] = t_prev; br_t[1] = t;
            br_f[0] = f_prev; br_f[1] = f_new;
            br_gtd[0] = gtd_prev; br_gtd[1] = gtd_new;
            br_g[0] = g_prev; br_g[1] = g;
            bracketed = true;
            break;
        }
        if (std::abs(gtd_new) <= -p.c2 * gtd0) {
            br_t[0] = br_t[1] = t;
            br_f[0] = br_f[1] = f_new;
            br_g[0] = br_g[1] = g;
            done = true;
            bracketed = true;
            break;
        }
        if (gtd_new >= 0.0) {
            br_t[0] = t_prev; br_t[1] = t;
            br_f[0] = f_prev; br_f[1] = f_new;
            br_gtd[0] = gtd_prev; br_gtd[1] = gtd_new;
            br_g[0] = g_prev; br_g[1] = g;
            bracketed = true;
            break;
        }
        const double min_step = t + 0.01 * (t - t_prev);
        const double max_step = t * 10.0;
        const double tmp = t;
        t = cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, min_step, max_step);
        t_prev = tmp;
        f_prev = f_new;
        gtd_prev = gtd_new;
        g_prev = g;
        std::tie(f_new, gtd_new) = eval(t);
        ++ls_iter;
    }
    if (!bracketed) {
        br_t[0] = 0.0; br_t[1] = t;
        br_f[0] = f0; br_f[1] = f_new;
        br_gtd[0] = gtd0; br_gtd[1] = gtd_new;
        br_g[0].assign(g0.begin(), g0.end());
        br_g[1] = g;
    }

    // zoom phase
    int low = br_f[0] <= br_f[1] ? 0 : 1;
    int high = 1 - low;
    bool insufficient = false;
    while (!done && ls_iter < p.max_line_search) {
        if (std::abs(br_t[1] - br_t[0]) * d_norm < 1e-9) break;
        t = cubic_interpolate(br_t[0], br_f[0], br_gtd[0], br_t[1], br_f[1], br_gtd[1],
                              std::min(br_t[0], br_t[1]), std::max(br_t[0], br_t[1]));
        const double bmax = std::max(br_t[0], br_t[1]);
        const double bmin = std::min(br_t[0], br_t[1]);
        const double eps = 0.1 * (bmax - bmin);
        if (std::min(bmax - t, t - bmin) < eps) {
            if (insufficient || t >= bmax || t <= bmin) {
                t = (std::abs(t - bmax) < std::abs(t - bmin)) ? bmax - eps : bmin + eps;
                insufficient = false;
            } else {
                insufficient = true;
            }
        } else {
            insufficient = false;
        }
        std::tie(f_new, gtd_new) = eval(t);
        ++ls_iter;
        if (f_new > f0 + p.c1 * t * gtd0 || f_new >= br_f[low]) {
            br_t[high] = t;
            br_f[high] = f_new;
            br_gtd[high] = gtd_new;
            br_g[high] = g;
            low = br_f[0] <= br_f[1] ? 0 : 1;
            high = 1 - low;
        } else {
            if (std::abs(gtd_new) <= -p.c2 * gtd0) {
                done = true;
            } else if (gtd_new * (br_t[high] - br_t[low]) >= 0.0) {
                br_t[high] = br_t[low];
                br_f[high] = br_f[low];
                br_gtd[high] = br_gtd[low];
                br_g[high] = br_g[low];
            }
            br_t[low] = t;
            br_f[low] = f_new;
            br_gtd[low] = gtd_new;
            br_g[low] = g;
        }
    }

    out.t = br_t[low];
    out.f = br_f[low];
    out.wolfe = done && std::isfinite(out.f);
    g = br_g[low];
    return out;
}

}  // namespace

LbfgsResult lbfgs_minimize(const LossGradFn& fn, std::vector<double> x0, const LbfgsParams& params,
                           const IterCallback& callback) {
    const std::size_t n = x0.size();
    LbfgsResult res;
    res.x = std::move(x0);

    std::vector<double> g(n), g_prev(n), xt(n), d(n), q(n);
    double f = fn(res.x, g);
    res.evaluations = 1;
    if (!std::isfinite(f)) throw std::runtime_error("lbfgs_minimize: loss not finite at the start");

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    double h_diag = 1.0;
    std::vector<double> alpha(params.memory);
    bool restarted = false;

    if (max_abs(g) <= params.grad_tol) {
        res.f = f;
        res.status = LbfgsStatus::kConverged;
        return res;
    }

    for (int iter = 1; iter <= params.max_iterations; ++iter) {
        // two-loop recursion for d = -H g
        if (s_hist.empty()) {
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
        } else {
            q.assign(g.begin(), g.end());
            const int m = static_cast<int>(s_hist.size());
            for (int k = m - 1; k >= 0; --k) {
                alpha[k] = rho_hist[k] * dot(s_hist[k], q);
                for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y_hist[k][i];
            }
            for (std::size_t i = 0; i < n; ++i) q[i] *= h_diag;
            for (int k = 0; k < m; ++k) {
                const double beta = rho_hist[k] * dot(y_hist[k], q);
                for (std::size_t i = 0; i < n; ++i) q[i] += (alpha[k] - beta) * s_hist[k][i];
            }
            for (std::size_t i = 0; i < n; ++i) d[i] = -q[i];
        }

        double gtd = dot(g, d);
        if (!(gtd < 0.0)) {
            // not a descent direction; drop the history once and retry
            if (!restarted && !s_hist.empty()) {
                restarted = true;
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                h_diag = 1.0;
                for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
                gtd = dot(g, d);
                if (!(gtd < 0.0)) {
                    res.f = f;
                    res.status = LbfgsStatus::kStalled;
                    return res;
                }
            } else {
                res.f = f;
                res.status = LbfgsStatus::kStalled;
                return res;
            }
        }

        double t = (iter == 1 || s_hist.empty())
                       ? std::min(1.0, 1.0 / std::max(1e-300, [&] {
                             double s = 0.0;
                             for (double v : g) s += std::abs(v);
                             return s;
                         }()))
                       : 1.0;

        g_prev = g;
        const double f_prev = f;
        LineSearchOutcome ls = strong_wolfe(fn, res.x, d, t, f, g_prev, gtd, params, g, xt);
        res.evaluations += ls.evals;

        // a strict decrease without the curvature condition is still usable
        // (the bracket can collapse on a spline-knot kink); the positive
        // curvature test below keeps such steps out of the history
        if (!(ls.f < f)) {
            if (!restarted && !s_hist.empty()) {
                // retry once from steepest descent
                restarted = true;
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                h_diag = 1.0;
                for (std::size_t i = 0; i < n; ++i) d[i] = -g_prev[i];
                gtd = dot(g_prev, d);
                t = std::min(1.0, 1.0 / std::max(1e-300, max_abs(g_prev) * n));
                ls = strong_wolfe(fn, res.x, d, t, f, g_prev, gtd, params, g, xt);
                res.evaluations += ls.evals;
            }
            if (!(ls.f < f)) {
                res.f = f;
                res.status = LbfgsStatus::kLineSearchFailed;
                fn(res.x, g);  // leave the oracle evaluated at the returned point
                ++res.evaluations;
                return res;
            }
        }
        restarted = false;

        // accept the step
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = ls.t * d[i];
            res.x[i] += s[i];
            y[i] = g[i] - g_prev[i];
        }
        f = ls.f;
        res.iterations = iter;
        if (callback) callback(iter, res.x, f);

        const double ys = dot(y, s);
        if (ys > 1e-10) {
            if (static_cast<int>(s_hist.size()) == params.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            h_diag = ys / dot(y, y);
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / ys);
        }

        if (max_abs(g) <= params.grad_tol) {
            res.f = f;
            res.status = LbfgsStatus::kConverged;
            return res;
        }
        if (ls.t * max_abs(d) <= params.step_tol) {
            res.f = f;
            res.status = LbfgsStatus::kStalled;
            return res;
        }
        if (std::abs(f - f_prev) <= params.loss_change_tol * (1.0 + std::abs(f))) {
            res.f = f;
            res.status = LbfgsStatus::kStalled;
            return res;
        }
    }
    res.f = f;
    res.status = LbfgsStatus::kMaxIterations;
    return res;
}

}  // namespace kanoc
