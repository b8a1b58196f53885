#include <cmath>

#include "doctest.h"
#include "kanoc/expr.hpp"

using namespace kanoc;

TEST_SUITE("expr") {
    TEST_CASE("numeric evaluation of a coordinate expression") {
        const Expr t = Expr::coord(0);
        const Expr e = sq(t) * 3.0 - exp(t) + pow(t, 1.5);
        const double p[] = {0.81};
        CHECK(e.eval_at(p) ==
              doctest::Approx(3.0 * 0.81 * 0.81 - std::exp(0.81) + std::pow(0.81, 1.5))
                  .epsilon(1e-14));
    }

    TEST_CASE("graph build matches numeric evaluation") {
        const Expr t = Expr::coord(0);
        const Expr e = sin(t * 2.0) / (cos(t) + 2.0) + sqrt(t + 1.5);
        const double p[] = {0.4};
        Tape tape;
        const Var coords[] = {tape.input(0.4)};
        Expr::BuildCtx ctx;
        ctx.coords = coords;
        CHECK(tape.value(e.build(tape, ctx)) == doctest::Approx(e.eval_at(p)).epsilon(1e-14));
    }

    TEST_CASE("parser handles precedence, powers and functions") {
        ExprSymbols sym;
        sym.dim = 1;
        sym.states = 1;
        const Expr e = parse_expr("(x1 - exp(t^2))^2 + 2*t - -1", sym);
        Expr::EvalCtx ctx;
        const double p[] = {0.3};
        ctx.coords = p;
        ctx.state = [](int) { return 1.5; };
        const double expect = std::pow(1.5 - std::exp(0.09), 2) + 0.6 + 1.0;
        CHECK(e.eval(ctx) == doctest::Approx(expect).epsilon(1e-13));
    }

    TEST_CASE("parser resolves coordinates by convention") {
        ExprSymbols sym;
        sym.dim = 2;
        sym.states = 1;
        const Expr e = parse_expr("z1 + 10*t", sym);  // z1 = dim 0, t = last dim
        const double p[] = {0.25, 0.5};
        CHECK(e.eval_at(p) == doctest::Approx(5.25));
    }

    TEST_CASE("parser accepts derivative and integral atoms") {
        ExprSymbols sym;
        sym.dim = 2;
        sym.states = 1;
        const Expr e = parse_expr("dt(x1) + dx(x1, z1) + dxx(x1, z1)", sym);
        int partials = 0;
        e.visit([&](const ExprNode& n) {
            if (n.kind == ExprKind::kPartial) ++partials;
        });
        CHECK(partials == 3);

        ExprSymbols sym1;
        sym1.dim = 1;
        sym1.states = 1;
        const Expr v = parse_expr("u - x1 + vint((2*t^2 + t)*exp(s*t - s^2); x1)", sym1);
        bool has_volterra = false;
        v.visit([&](const ExprNode& n) {
            if (n.kind == ExprKind::kVolterra) has_volterra = true;
        });
        CHECK(has_volterra);
    }

    TEST_CASE("parser rejects unknown identifiers and malformed input") {
        ExprSymbols sym;
        sym.dim = 1;
        sym.states = 1;
        CHECK_THROWS_AS(parse_expr("x1 + bogus", sym), std::invalid_argument);
        CHECK_THROWS_AS(parse_expr("x2", sym), std::invalid_argument);
        CHECK_THROWS_AS(parse_expr("(x1", sym), std::invalid_argument);
        CHECK_THROWS_AS(parse_expr("x1 +", sym), std::invalid_argument);
        CHECK_THROWS_AS(parse_expr("t ^ x1", sym), std::invalid_argument);  // exponent must be const
        CHECK_THROWS_AS(parse_expr("s", sym), std::invalid_argument);  // inner var outside kernel
    }

    TEST_CASE("scalars need to be declared") {
        ExprSymbols sym;
        sym.dim = 1;
        sym.states = 1;
        CHECK_THROWS_AS(parse_expr("kappa * t", sym), std::invalid_argument);
        sym.scalars.insert("kappa");
        const Expr e = parse_expr("kappa * t", sym);
        Expr::EvalCtx ctx;
        const double p[] = {0.5};
        ctx.coords = p;
        ctx.scalar = [](const std::string&) { return 4.0; };
        CHECK(e.eval(ctx) == doctest::Approx(2.0));
    }
}
