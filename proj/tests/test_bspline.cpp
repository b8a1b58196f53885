#include <cmath>

#include "doctest.h"
#include "kanoc/bspline.hpp"
#include "kanoc/rng.hpp"
#include "kanoc/validate.hpp"

using namespace kanoc;

TEST_SUITE("bspline") {
    TEST_CASE("degree-0 single interval is the indicator") {
        const BSplineBasis basis(0, 1, 0.0, 1.0);
        CHECK(basis.count() == 1);
        const double c[] = {1.0};
        CHECK(basis.spline(c, 0.5) == 1.0);
    }

    TEST_CASE("partition of unity when all coefficients are one") {
        for (int k : {1, 2, 3}) {
            for (int g : {3, 5, 8}) {
                const BSplineBasis basis(k, g);
                std::vector<double> c(basis.count(), 1.0);
                for (double x : {-0.95, -0.31, 0.0, 0.62, 0.99})
                    CHECK(basis.spline(c, x) == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("linear reproduction at Greville abscissae") {
        const BSplineBasis basis(3, 5);
        const auto greville = basis.greville();
        std::vector<double> c(greville.begin(), greville.end());
        // brute-force dense grid comparison against f(x) = x
        for (int i = 0; i <= 2000; ++i) {
            const double x = -1.0 + 2.0 * i / 2000.0;
            CHECK(std::abs(basis.spline(c, x) - x) < 1e-10);
        }
    }

    TEST_CASE("basis functions are nonnegative with local support") {
        const BSplineBasis basis(3, 5);
        Rng rng(5);
        for (int trial = 0; trial < 100; ++trial) {
            const double x = rng.uniform(-1.0, 1.0);
            const auto vals = basis.eval_all(x);
            int nonzero = 0;
            for (double v : vals) {
                CHECK(v >= -1e-14);
                if (v > 0.0) ++nonzero;
            }
            CHECK(nonzero <= basis.degree() + 1);
        }
    }

    TEST_CASE("derivative windows match finite differences") {
        const BSplineBasis basis(3, 5);
        Rng rng(17);
        std::vector<double> c(basis.count());
        for (double& ci : c) ci = rng.normal();
        const double h = 1e-6;
        for (int trial = 0; trial < 50; ++trial) {
            const double x = rng.uniform(-0.95, 0.95);
            const double d1 = basis.spline(c, x, 1);
            const double fd1 = (basis.spline(c, x + h) - basis.spline(c, x - h)) / (2 * h);
            CHECK(d1 == doctest::Approx(fd1).epsilon(1e-5));
            const double d2 = basis.spline(c, x, 2);
            const double fd2 = (basis.spline(c, x + h, 1) - basis.spline(c, x - h, 1)) / (2 * h);
            CHECK(d2 == doctest::Approx(fd2).epsilon(1e-5));
        }
    }

    TEST_CASE("property suite") {
        const SuiteResult res = validate_bspline();
        INFO(res.detail);
        CHECK(res.passed);
    }
}
