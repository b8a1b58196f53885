#include "kanoc/quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace kanoc {

QuadratureRule legendre_rule(int order) {
    if (order < 1) throw std::invalid_argument("legendre_rule: order must be >= 1");
    const int q = order;
    QuadratureRule rule;
    rule.order = q;
    rule.nodes.assign(q, 0.0);
    rule.weights.assign(q, 0.0);
    const double pi = 3.14159265358979323846;
    const int half = (q + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev initial guess for the i-th root (descending order)
        double x = std::cos(pi * (i + 0.75) / (q + 0.5));
        double dp = 0.0;
        bool converged = false;
        for (int it = 0; it < 100; ++it) {
            // Legendre recurrence: P_0 = 1, P_1 = x
            double p0 = 1.0, p1 = x;
            for (int n = 2; n <= q; ++n) {
                const double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
                p0 = p1;
                p1 = p2;
            }
            dp = q * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) {
                converged = true;
                break;
            }
        }
        if (!converged) throw std::runtime_error("legendre_rule: Newton iteration did not converge");
        // recompute derivative at the converged root for the weight
        double p0 = 1.0, p1 = x;
        for (int n = 2; n <= q; ++n) {
            const double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
            p0 = p1;
            p1 = p2;
        }
        dp = q * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is in (0, 1]; mirror to enforce exact symmetry
        rule.nodes[q - 1 - i] = x;
        rule.nodes[i] = -x;
        rule.weights[q - 1 - i] = w;
        rule.weights[i] = w;
    }
    if (q % 2 == 1) {
        rule.nodes[q / 2] = 0.0;
        double p0 = 1.0, p1 = 0.0;  // P_n(0)
        for (int n = 2; n <= q; ++n) {
            const double p2 = (-(n - 1.0) * p0) / n;
            p0 = p1;
            p1 = p2;
        }
        // dP/dx at 0 equals q * (-p0_prev) ... use recurrence form directly
        const double dp0 = q * (0.0 * p1 - p0) / (0.0 - 1.0);
        rule.weights[q / 2] = 2.0 / (dp0 * dp0);
    }
    return rule;
}

MappedRule map_rule(const QuadratureRule& rule, double a, double b) {
    MappedRule out;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    out.points.reserve(rule.nodes.size());
    out.weights.reserve(rule.nodes.size());
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        out.points.push_back(half * rule.nodes[i] + mid);
        out.weights.push_back(half * rule.weights[i]);
    }
    return out;
}

TensorRule::TensorRule(std::span<const QuadratureRule> rules, std::span<const double> lo,
                       std::span<const double> hi) {
    if (rules.empty() || rules.size() != lo.size() || rules.size() != hi.size())
        throw std::invalid_argument("TensorRule: inconsistent per-dimension inputs");
    dim_ = static_cast<int>(rules.size());
    std::vector<MappedRule> mapped;
    std::size_t total = 1;
    for (int d = 0; d < dim_; ++d) {
        if (!(lo[d] < hi[d])) throw std::invalid_argument("TensorRule: empty box dimension");
        mapped.push_back(map_rule(rules[d], lo[d], hi[d]));
        axes_.push_back(mapped.back().points);
        total *= mapped.back().points.size();
    }
    points_.resize(total * dim_);
    weights_.resize(total);
    std::vector<std::size_t> idx(dim_, 0);
    for (std::size_t i = 0; i < total; ++i) {
        double w = 1.0;
        for (int d = 0; d < dim_; ++d) {
            points_[i * dim_ + d] = mapped[d].points[idx[d]];
            w *= mapped[d].weights[idx[d]];
        }
        weights_[i] = w;
        for (int d = dim_ - 1; d >= 0; --d) {
            if (++idx[d] < mapped[d].points.size()) break;
            idx[d] = 0;
        }
    }
}

double integrate_cost(const TensorRule& rule, std::span<const double> integrand) {
    if (integrand.size() != rule.count())
        throw std::invalid_argument("integrate_cost: integrand size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < integrand.size(); ++i) {
        if (!std::isfinite(integrand[i])) {
            char buf[160];
            auto p = rule.point(i);
            std::snprintf(buf, sizeof buf,
                          "integrate_cost: non-finite integrand at node %zu (first coord %.6g)", i,
                          p[0]);
            throw std::runtime_error(buf);
        }
        acc += rule.weights()[i] * integrand[i];
    }
    return acc;
}

Var integrate_cost(Tape& tape, const TensorRule& rule, std::span<const Var> integrand) {
    if (integrand.size() != rule.count())
        throw std::invalid_argument("integrate_cost: integrand size mismatch");
    return tape.lin_comb(integrand, rule.weights());
}

VolterraOperator::VolterraOperator(Kernel kernel, double t0, std::span<const double> rows,
                                   int inner_order)
    : rows_(rows.begin(), rows.end()), inner_order_(inner_order) {
    if (!kernel) throw std::invalid_argument("VolterraOperator: null kernel");
    if (inner_order < 1) throw std::invalid_argument("VolterraOperator: inner order must be >= 1");
    const QuadratureRule base = legendre_rule(inner_order);
    points_.resize(rows_.size() * inner_order_);
    coeffs_.resize(rows_.size() * inner_order_);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const MappedRule m = map_rule(base, t0, rows_[i]);
        for (int k = 0; k < inner_order_; ++k) {
            const double s = m.points[k];
            points_[i * inner_order_ + k] = s;
            coeffs_[i * inner_order_ + k] = m.weights[k] * kernel(rows_[i], s);
        }
    }
}

std::span<const double> VolterraOperator::inner_points(std::size_t i) const {
    return {points_.data() + i * inner_order_, static_cast<std::size_t>(inner_order_)};
}

std::span<const double> VolterraOperator::coeffs(std::size_t i) const {
    return {coeffs_.data() + i * inner_order_, static_cast<std::size_t>(inner_order_)};
}

std::vector<double> VolterraOperator::apply(std::span<const double> state_samples) const {
    if (state_samples.size() != points_.size())
        throw std::invalid_argument("VolterraOperator: sample count mismatch");
    std::vector<double> out(rows_.size(), 0.0);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        double acc = 0.0;
        for (int k = 0; k < inner_order_; ++k)
            acc += coeffs_[i * inner_order_ + k] * state_samples[i * inner_order_ + k];
        out[i] = acc;
    }
    return out;
}

std::vector<Var> VolterraOperator::apply(Tape& tape, std::span<const Var> state_vars) const {
    if (state_vars.size() != points_.size())
        throw std::invalid_argument("VolterraOperator: sample count mismatch");
    std::vector<Var> out;
    out.reserve(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i)
        out.push_back(tape.lin_comb(state_vars.subspan(i * inner_order_, inner_order_), coeffs(i)));
    return out;
}

}  // namespace kanoc
