#include <cmath>

#include "doctest.h"
#include "kanoc/quadrature.hpp"
#include "kanoc/validate.hpp"

using namespace kanoc;

namespace {

/// Composite Simpson oracle on [a, b].
double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    const double h = (b - a) / panels;
    double acc = f(a) + f(b);
    for (int i = 1; i < panels; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace

TEST_SUITE("quadrature") {
    TEST_CASE("one-point rule") {
        const QuadratureRule r = legendre_rule(1);
        CHECK(r.nodes.size() == 1);
        CHECK(r.nodes[0] == doctest::Approx(0.0));
        CHECK(r.weights[0] == doctest::Approx(2.0));
    }

    TEST_CASE("two-point rule hits the P2 roots") {
        const QuadratureRule r = legendre_rule(2);
        const double root = 1.0 / std::sqrt(3.0);  // 0.5773502692
        CHECK(r.nodes[0] == doctest::Approx(-root).epsilon(1e-12));
        CHECK(r.nodes[1] == doctest::Approx(root).epsilon(1e-12));
        CHECK(r.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.weights[1] == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("Q=5 integrates x^8 exactly") {
        const QuadratureRule r = legendre_rule(5);
        double acc = 0.0;
        for (std::size_t i = 0; i < r.nodes.size(); ++i)
            acc += r.weights[i] * std::pow(r.nodes[i], 8);
        CHECK(acc == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
    }

    TEST_CASE("nodes are symmetric and increasing, weights positive") {
        for (int q : {3, 8, 16, 31}) {
            const QuadratureRule r = legendre_rule(q);
            for (int i = 0; i + 1 < q; ++i) CHECK(r.nodes[i] < r.nodes[i + 1]);
            for (int i = 0; i < q; ++i) {
                CHECK(r.weights[i] > 0.0);
                CHECK(r.nodes[i] == doctest::Approx(-r.nodes[q - 1 - i]).epsilon(1e-13));
            }
        }
    }

    TEST_CASE("large order still converges") { CHECK_NOTHROW(legendre_rule(200)); }
    TEST_CASE("order below one is rejected") {
        CHECK_THROWS_AS(legendre_rule(0), std::invalid_argument);
    }

    TEST_CASE("integrate_cost: constants and polynomials on [0,1]") {
        const QuadratureRule base = legendre_rule(2);
        const QuadratureRule rules[] = {base};
        const double lo[] = {0.0}, hi[] = {1.0};
        const TensorRule rule(rules, lo, hi);

        std::vector<double> ones(rule.count(), 1.0);
        CHECK(integrate_cost(rule, ones) == doctest::Approx(1.0).epsilon(1e-14));

        std::vector<double> squares(rule.count());
        for (std::size_t i = 0; i < rule.count(); ++i)
            squares[i] = rule.point(i)[0] * rule.point(i)[0];
        CHECK(integrate_cost(rule, squares) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    TEST_CASE("integrate_cost: unit square") {
        const QuadratureRule base = legendre_rule(3);
        const QuadratureRule rules[] = {base, base};
        const double lo[] = {0.0, 0.0}, hi[] = {1.0, 1.0};
        const TensorRule rule(rules, lo, hi);
        std::vector<double> ones(rule.count(), 1.0);
        CHECK(integrate_cost(rule, ones) == doctest::Approx(1.0).epsilon(1e-13));
    }

    TEST_CASE("2D tensor quadrature equals iterated 1D on separable integrands") {
        const QuadratureRule rq = legendre_rule(6);
        const QuadratureRule rules[] = {rq, rq};
        const double lo[] = {0.0, -1.0}, hi[] = {2.0, 1.5};
        const TensorRule rule(rules, lo, hi);
        auto f1 = [](double x) { return std::sin(1.3 * x) + 0.4; };
        auto f2 = [](double y) { return std::exp(0.3 * y); };
        std::vector<double> vals(rule.count());
        for (std::size_t i = 0; i < rule.count(); ++i)
            vals[i] = f1(rule.point(i)[0]) * f2(rule.point(i)[1]);
        const MappedRule m1 = map_rule(rq, lo[0], hi[0]);
        const MappedRule m2 = map_rule(rq, lo[1], hi[1]);
        double i1 = 0.0, i2 = 0.0;
        for (int j = 0; j < 6; ++j) {
            i1 += m1.weights[j] * f1(m1.points[j]);
            i2 += m2.weights[j] * f2(m2.points[j]);
        }
        CHECK(integrate_cost(rule, vals) == doctest::Approx(i1 * i2).epsilon(1e-12));
    }

    TEST_CASE("non-finite integrand names the node") {
        const QuadratureRule base = legendre_rule(2);
        const QuadratureRule rules[] = {base};
        const double lo[] = {0.0}, hi[] = {1.0};
        const TensorRule rule(rules, lo, hi);
        std::vector<double> vals(rule.count(), 1.0);
        vals[1] = std::nan("");
        CHECK_THROWS_WITH_AS(integrate_cost(rule, vals),
                             doctest::Contains("non-finite integrand at node 1"),
                             std::runtime_error);
    }

    TEST_CASE("volterra: unit kernel and state") {
        auto one = [](double, double) { return 1.0; };
        const double rows[] = {0.5};
        const VolterraOperator op(one, 0.0, rows, 10);
        std::vector<double> samples(10, 1.0);
        CHECK(op.apply(samples)[0] == doctest::Approx(0.5).epsilon(1e-14));
    }

    TEST_CASE("volterra: linear state") {
        auto one = [](double, double) { return 1.0; };
        const double rows[] = {1.0};
        const VolterraOperator op(one, 0.0, rows, 10);
        std::vector<double> samples(10);
        for (int k = 0; k < 10; ++k) samples[k] = op.inner_points(0)[k];
        CHECK(op.apply(samples)[0] == doctest::Approx(0.5).epsilon(1e-12));
    }

    TEST_CASE("volterra: integro-differential kernel against Simpson") {
        // K(t,s) = (2t^2 + t) e^{st - s^2}, x(s) = e^{s^2}; at t=1 the integrand
        // collapses to 3 e^s, so the integral is 3(e - 1)
        auto kernel = [](double t, double s) { return (2 * t * t + t) * std::exp(s * t - s * s); };
        const double rows[] = {1.0};
        const VolterraOperator op(kernel, 0.0, rows, 20);
        std::vector<double> samples(20);
        for (int k = 0; k < 20; ++k) {
            const double s = op.inner_points(0)[k];
            samples[k] = std::exp(s * s);
        }
        const double got = op.apply(samples)[0];
        CHECK(got == doctest::Approx(3.0 * (std::exp(1.0) - 1.0)).epsilon(1e-10));
        const double oracle =
            simpson([&](double s) { return kernel(1.0, s) * std::exp(s * s); }, 0.0, 1.0, 10000);
        CHECK(got == doctest::Approx(oracle).epsilon(1e-9));
    }

    TEST_CASE("volterra with unit kernel matches the antiderivative oracle") {
        auto one = [](double, double) { return 1.0; };
        auto f = [](double s) { return std::sin(2.0 * s) + 0.3 * std::exp(s); };
        std::vector<double> rows;
        for (int i = 1; i <= 8; ++i) rows.push_back(0.125 * i);
        const VolterraOperator op(one, 0.0, rows, 20);
        std::vector<double> samples;
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (double s : op.inner_points(i)) samples.push_back(f(s));
        const auto got = op.apply(samples);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double oracle = simpson(f, 0.0, rows[i], 10000);
            CHECK(std::abs(got[i] - oracle) < 1e-8);
        }
    }

    TEST_CASE("volterra apply is differentiable through the state") {
        auto kernel = [](double t, double s) { return 1.0 + t * s; };
        const double rows[] = {0.4, 0.9};
        const VolterraOperator op(kernel, 0.0, rows, 5);
        Tape tape;
        ParameterStore store;
        store.register_slice("a", 1);
        store[0] = 0.7;
        const Var a = tape.param(store, 0);
        std::vector<Var> samples;
        for (std::size_t i = 0; i < 2; ++i)
            for (double s : op.inner_points(i)) samples.push_back(a * tape.constant(s));
        const auto out = op.apply(tape, samples);
        const Var sum = out[0] + out[1];
        std::vector<double> grad(1);
        tape.param_gradient(sum, grad);
        // d/da of a * (known integral values)
        const double expected = tape.value(sum) / 0.7;
        CHECK(grad[0] == doctest::Approx(expected).epsilon(1e-12));
    }

    TEST_CASE("exactness property suite") {
        const SuiteResult res = validate_quadrature();
        INFO(res.detail);
        CHECK(res.passed);
    }
}
