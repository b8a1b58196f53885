#pragma once

#include <functional>
#include <span>
#include <vector>

#include "kanoc/tape.hpp"

namespace kanoc {

/// Gauss-Legendre rule on the reference interval (-1, 1).
struct QuadratureRule {
    int order = 0;
    std::vector<double> nodes;    // strictly increasing, symmetric about 0
    std::vector<double> weights;  // positive, sum to 2
};

/// Nodes at the roots of the Legendre polynomial P_Q (Newton iteration from
/// Chebyshev initial guesses), weights 2 / ((1 - x^2) P_Q'(x)^2).
QuadratureRule legendre_rule(int order);

/// Rule mapped onto [a, b]; weights absorb the (b - a)/2 scale.
struct MappedRule {
    std::vector<double> points;
    std::vector<double> weights;
};
MappedRule map_rule(const QuadratureRule& rule, double a, double b);

/// Tensor product of per-dimension rules over a box. Point i is stored as
/// points[i*dim .. i*dim+dim); weights carry the full volume scale.
class TensorRule {
public:
    TensorRule(std::span<const QuadratureRule> rules, std::span<const double> lo,
               std::span<const double> hi);

    int dim() const { return dim_; }
    std::size_t count() const { return weights_.size(); }
    std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }
    const std::vector<double>& weights() const { return weights_; }
    /// Distinct mapped nodes of one dimension (useful for boundary grids).
    const std::vector<double>& axis(int d) const { return axes_[d]; }

private:
    int dim_;
    std::vector<double> points_;
    std::vector<double> weights_;
    std::vector<std::vector<double>> axes_;
};

/// Weighted sum of integrand values at the tensor nodes; the approximation of
/// the running-cost integral. Throws if a value is non-finite, naming the node.
double integrate_cost(const TensorRule& rule, std::span<const double> integrand);
/// Differentiable form: the integrand values are graph nodes.
Var integrate_cost(Tape& tape, const TensorRule& rule, std::span<const Var> integrand);

/// Discretization of the Volterra operator v(t) = int_{t0}^{t} K(t, s) x(s) ds
/// on a fixed set of evaluation rows: per row, an inner Gauss rule is mapped
/// onto [t0, row], the kernel is evaluated at (row, inner node), and the
/// integral becomes a weighted sum of the state samples at the inner nodes.
class VolterraOperator {
public:
    using Kernel = std::function<double(double t, double s)>;

    VolterraOperator(Kernel kernel, double t0, std::span<const double> rows, int inner_order);

    std::size_t row_count() const { return rows_.size(); }
    int inner_order() const { return inner_order_; }
    /// Inner nodes for row i; the state must be sampled here.
    std::span<const double> inner_points(std::size_t i) const;
    /// Row coefficients: v_i = sum_k coeff(i)[k] * state(inner point k).
    std::span<const double> coeffs(std::size_t i) const;

    /// Numeric application given state samples (row-major, row_count x Q).
    std::vector<double> apply(std::span<const double> state_samples) const;
    /// Differentiable application; state_vars laid out like state_samples.
    std::vector<Var> apply(Tape& tape, std::span<const Var> state_vars) const;

private:
    std::vector<double> rows_;
    int inner_order_;
    std::vector<double> points_;  // row-major
    std::vector<double> coeffs_;  // row-major: kernel * weight * (row - t0)/2
};

}  // namespace kanoc
