#include <cmath>

#include "doctest.h"
#include "kanoc/tape.hpp"
#include "kanoc/validate.hpp"

using namespace kanoc;

TEST_SUITE("autodiff") {
    TEST_CASE("evaluate: direct arithmetic") {
        Tape tape;
        const Var x = tape.input(3.0);
        const Var y = x * x;
        CHECK(tape.value(y) == 9.0);

        const Var s = tape.sin(tape.input(0.0));
        CHECK(tape.value(s) == 0.0);

        const Var z = tape.silu(tape.input(0.0));
        CHECK(tape.value(z) == 0.0);
    }

    TEST_CASE("gradient: basic rules") {
        Tape tape;
        const Var x = tape.input(3.0);
        const Var y = x * x;
        tape.backward(y);
        CHECK(tape.adjoint(x) == doctest::Approx(6.0).epsilon(1e-14));

        Tape t2;
        const Var a = t2.input(1.5707963267948966);  // pi/2
        const Var s = t2.sin(a);
        t2.backward(s);
        CHECK(std::abs(t2.adjoint(a)) < 1e-15);

        Tape t3;
        ParameterStore store;
        store.register_slice("w", 1);
        store[0] = 5.0;
        const Var w = t3.param(store, 0);
        const Var f = w * t3.constant(2.0);
        std::vector<double> grad(1);
        t3.param_gradient(f, grad);
        CHECK(grad[0] == 2.0);
    }

    TEST_CASE("gradient of a constant is exactly zero") {
        Tape tape;
        const Var x = tape.input(0.7);
        const Var c = tape.constant(4.2);
        const Var f = x + c * c;
        tape.backward(f);
        CHECK(tape.adjoint(c) == doctest::Approx(2.0 * 4.2));  // adjoint exists
        // but a graph that is only constants has zero input gradient
        Tape t2;
        const Var y = t2.input(1.0);
        const Var g = t2.constant(3.0) * t2.constant(2.0);
        const Var out = g + t2.constant(0.0) * y;
        t2.backward(out);
        CHECK(t2.adjoint(y) == 0.0);
    }

    TEST_CASE("second derivatives") {
        Tape tape;
        const Var x = tape.input(2.0);
        const Var y = x * x * x;
        CHECK(second_derivative(tape, y, 0, 0) == doctest::Approx(12.0).epsilon(1e-12));

        Tape t2;
        const Var a = t2.input(0.0);
        const Var s = t2.sin(a);
        CHECK(second_derivative(t2, s, 0, 0) == doctest::Approx(0.0));

        Tape t3;
        const Var u = t3.input(1.3);
        const Var v = t3.input(-0.4);
        const Var f = u * v;
        CHECK(second_derivative(t3, f, 0, 1) == doctest::Approx(1.0).epsilon(1e-13));
    }

    TEST_CASE("second-derivative index out of range") {
        Tape tape;
        const Var x = tape.input(1.0);
        const Var y = x * x;
        CHECK_THROWS_AS(second_derivative(tape, y, 0, 5), std::out_of_range);
    }

    TEST_CASE("cross-tape variables are rejected at construction") {
        Tape a, b;
        const Var x = a.input(1.0);
        const Var y = b.input(2.0);
        CHECK_THROWS_AS(a.add(x, y), std::invalid_argument);
    }

    TEST_CASE("unknown parameter reference is a construction-time error") {
        Tape tape;
        ParameterStore store;
        store.register_slice("w", 2);
        CHECK_THROWS_AS(tape.param(store, 7), std::out_of_range);
    }

    TEST_CASE("re-evaluation is bit-identical") {
        Tape tape;
        ParameterStore store;
        store.register_slice("p", 3);
        store[0] = 0.3;
        store[1] = -1.2;
        store[2] = 0.77;
        const Var x = tape.input(0.9);
        Var acc = tape.param(store, 0);
        acc = tape.exp(tape.sin(acc * x)) + tape.sqrt(tape.param(store, 1) * tape.param(store, 1) + 0.4);
        acc = acc / (tape.silu(x) + 2.0) + tape.pow(tape.param(store, 2) * tape.param(store, 2) + 0.3, 1.7);
        tape.forward(store);
        const double v1 = tape.value(acc);
        tape.forward(store);
        const double v2 = tape.value(acc);
        CHECK(v1 == v2);

        std::vector<double> g1(store.size()), g2(store.size());
        tape.param_gradient(acc, g1);
        tape.param_gradient(acc, g2);
        CHECK(g1 == g2);
    }

    TEST_CASE("gradient linearity: a*f + b*g") {
        Tape tape;
        ParameterStore store;
        store.register_slice("p", 2);
        store[0] = 0.8;
        store[1] = -0.5;
        const Var w0 = tape.param(store, 0);
        const Var w1 = tape.param(store, 1);
        const Var f = tape.sin(w0) * tape.exp(w1);
        const Var g = tape.sqrt(w0 * w0 + 0.3) + w1 * w1;
        const double a = 2.25, b = -0.75;
        const Var combo = tape.constant(a) * f + tape.constant(b) * g;

        std::vector<double> gf(2), gg(2), gc(2);
        tape.param_gradient(f, gf);
        tape.param_gradient(g, gg);
        tape.param_gradient(combo, gc);
        for (int i = 0; i < 2; ++i)
            CHECK(gc[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-12));
    }

    TEST_CASE("finite-difference sweep over random composite graphs") {
        const SuiteResult res = validate_autodiff();
        INFO(res.detail);
        CHECK(res.passed);
    }

    TEST_CASE("pushforward tangents update with forward()") {
        // d/dx of x^2 stays correct after the input moves
        Tape tape;
        const Var x = tape.input(1.0);
        const Var y = x * x;
        const Var seeds[] = {x};
        auto map = tape.pushforward(seeds, static_cast<std::int32_t>(tape.size()));
        const Var dy = tape.tangent(map, y);
        CHECK(tape.value(dy) == doctest::Approx(2.0));
        tape.set_input(0, 3.5);
        tape.forward();
        CHECK(tape.value(dy) == doctest::Approx(7.0));
    }
}
