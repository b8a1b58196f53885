#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "kanoc/caputo.hpp"
#include "kanoc/validate.hpp"

using namespace kanoc;

namespace {
std::vector<double> uniform_grid(int m, double lo = 0.0, double hi = 1.0) {
    std::vector<double> g(m);
    for (int j = 0; j < m; ++j) g[j] = lo + (hi - lo) * j / (m - 1);
    return g;
}
constexpr double kPi = 3.14159265358979323846;
}  // namespace

TEST_SUITE("caputo") {
    TEST_CASE("gamma function") {
        CHECK(gamma_fn(1.0) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(gamma_fn(5.0) == doctest::Approx(24.0).epsilon(1e-14));
        CHECK(gamma_fn(1.5) == doctest::Approx(0.5 * std::sqrt(kPi)).epsilon(1e-12));
        CHECK_THROWS_AS(gamma_fn(0.0), std::invalid_argument);
        CHECK_THROWS_AS(gamma_fn(-2.5), std::invalid_argument);
    }

    TEST_CASE("half derivative of t on a fine grid") {
        const auto grid = uniform_grid(2000);
        const CaputoMatrix mat(0.5, grid);
        std::vector<double> vals(grid.begin(), grid.end());
        const auto got = mat.apply(vals);
        double worst = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (grid[j] < 0.05) continue;
            const double expect = 2.0 * std::sqrt(grid[j] / kPi);  // t^{1/2} / Gamma(1.5)
            worst = std::max(worst, std::abs(got[j] - expect));
        }
        CHECK(worst < 1e-3);
    }

    TEST_CASE("constants are annihilated") {
        for (double alpha : {0.3, 0.5, 0.7}) {
            const auto grid = uniform_grid(200);
            const CaputoMatrix mat(alpha, grid);
            std::vector<double> ones(grid.size(), 1.0);
            for (double v : mat.apply(ones)) CHECK(std::abs(v) < 1e-10);
        }
    }

    TEST_CASE("row sums vanish") {
        const auto grid = uniform_grid(300);
        const CaputoMatrix mat(0.4, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double sum = 0.0;
            for (double v : mat.row(i)) sum += v;
            CHECK(std::abs(sum) < 1e-10);
        }
    }

    TEST_CASE("half derivative of t^{3/2} matches the analytic scaling") {
        // D^{1/2} t^{3/2} = Gamma(2.5)/Gamma(2) * t = (3 sqrt(pi)/4) t
        const auto grid = uniform_grid(2000);
        const CaputoMatrix mat(0.5, grid);
        std::vector<double> vals(grid.size());
        for (std::size_t j = 0; j < grid.size(); ++j) vals[j] = std::pow(grid[j], 1.5);
        const auto got = mat.apply(vals);
        const double scale = 0.75 * std::sqrt(kPi);
        double worst = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j)
            worst = std::max(worst, std::abs(got[j] - scale * grid[j]));
        CHECK(worst < 1e-3);
    }

    TEST_CASE("two-point grid reproduces the single-interval formula") {
        const double grid[] = {0.0, 1.0};
        const CaputoMatrix mat(0.5, grid);
        const double vals[] = {0.0, 1.0};
        const auto got = mat.apply(vals);
        CHECK(got[0] == 0.0);
        CHECK(got[1] == doctest::Approx(1.0 / gamma_fn(1.5)).epsilon(1e-12));  // ~1.12838
    }

    TEST_CASE("linearity of the application") {
        const auto grid = uniform_grid(150);
        const CaputoMatrix mat(0.6, grid);
        std::vector<double> f(grid.size()), g(grid.size()), combo(grid.size());
        for (std::size_t j = 0; j < grid.size(); ++j) {
            f[j] = std::sin(3.0 * grid[j]);
            g[j] = std::exp(grid[j]);
            combo[j] = 2.0 * f[j] - 0.5 * g[j];
        }
        const auto df = mat.apply(f), dg = mat.apply(g), dc = mat.apply(combo);
        for (std::size_t j = 0; j < grid.size(); ++j)
            CHECK(dc[j] == doctest::Approx(2.0 * df[j] - 0.5 * dg[j]).epsilon(1e-12));
    }

    TEST_CASE("invalid construction") {
        const auto grid = uniform_grid(10);
        CHECK_THROWS_AS(CaputoMatrix(0.0, grid), std::invalid_argument);
        CHECK_THROWS_AS(CaputoMatrix(1.0, grid), std::invalid_argument);
        CHECK_THROWS_AS(CaputoMatrix(1.7, grid), std::invalid_argument);
        const double bad[] = {0.0, 0.5, 0.4};
        CHECK_THROWS_AS(CaputoMatrix(0.5, bad), std::invalid_argument);
        const double single[] = {0.0};
        CHECK_THROWS_AS(CaputoMatrix(0.5, single), std::invalid_argument);
    }

    TEST_CASE("length mismatch on application") {
        const auto grid = uniform_grid(10);
        const CaputoMatrix mat(0.5, grid);
        std::vector<double> bad(7, 1.0);
        CHECK_THROWS_AS(mat.apply(bad), std::invalid_argument);
    }

    TEST_CASE("graph application is differentiable through the samples") {
        const auto grid = uniform_grid(30);
        const CaputoMatrix mat(0.5, grid);
        Tape tape;
        ParameterStore store;
        store.register_slice("a", 1);
        store[0] = 1.3;
        const Var a = tape.param(store, 0);
        std::vector<Var> samples;
        for (double t : grid) samples.push_back(a * tape.constant(t));  // x(t) = a t
        const auto rows = mat.apply(tape, samples);
        // sum of D(a t) = a * sum of D(t); gradient w.r.t. a = sum of D(t)
        std::vector<Var> all(rows.begin(), rows.end());
        const std::vector<double> ones(all.size(), 1.0);
        const Var sum = tape.lin_comb(all, ones);
        std::vector<double> grad(1);
        tape.param_gradient(sum, grad);
        CHECK(grad[0] == doctest::Approx(tape.value(sum) / 1.3).epsilon(1e-12));
    }

    TEST_CASE("csv export round-trips the first rows") {
        const auto grid = uniform_grid(4);
        const CaputoMatrix mat(0.5, grid);
        const std::string path = (std::filesystem::temp_directory_path() / "kanoc_caputo.csv").string();
        mat.export_csv(path);
        std::ifstream in(path);
        REQUIRE(in.good());
        std::string line;
        std::getline(in, line);
        CHECK(line == "0,0,0,0");
        std::getline(in, line);
        CHECK(line.substr(0, 2) != "0,");  // row 1 starts with a negative entry
        std::filesystem::remove(path);
    }

    TEST_CASE("monomial oracle with grid refinement") {
        const SuiteResult res = validate_caputo();
        INFO(res.detail);
        CHECK(res.passed);
    }
}
