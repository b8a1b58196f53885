#include <cmath>

#include "doctest.h"
#include "kanoc/loss.hpp"
#include "kanoc/rng.hpp"
#include "kanoc/trainer.hpp"

using namespace kanoc;

namespace {

struct Setup {
    ControlProblem problem;
    ParameterStore store;
    std::vector<std::unique_ptr<Network>> nets;
    std::vector<Network*> ptrs;

    explicit Setup(const std::string& id, const std::string& kind = "kan",
                   LossAssembler::Options opts = {}) : problem(builtin_problem(id)) {
        build(kind);
        assembler = std::make_unique<LossAssembler>(problem, ptrs, store, opts);
    }
    Setup(ControlProblem p, const std::string& kind, LossAssembler::Options opts = {})
        : problem(std::move(p)) {
        build(kind);
        assembler = std::make_unique<LossAssembler>(problem, ptrs, store, opts);
    }
    void build(const std::string& kind) {
        std::vector<int> widths{problem.dim, 10, 1};
        for (int i = 0; i <= problem.states; ++i) {
            auto net = make_network(kind, widths);
            net->register_params(store, i == 0 ? "psi" : "xi" + std::to_string(i));
            net->init(store, mix_seed(17, i));
            nets.push_back(std::move(net));
            ptrs.push_back(nets.back().get());
        }
        for (const auto& s : problem.scalars) {
            const std::size_t off = store.register_slice(s.name, 1);
            store[off] = s.initial;
        }
    }
    std::unique_ptr<LossAssembler> assembler;
};

}  // namespace

TEST_SUITE("trainer") {
    TEST_CASE("loss breakdown identity") {
        // small fractional grid keeps this test quick
        LossAssembler::Options opts;
        opts.frac_grid = 120;
        Setup s("frac_forward", "kan", opts);
        const LossBreakdown b = s.assembler->breakdown(s.store.flatten());
        const auto& w = s.problem.weights;
        const double recomputed =
            w.cost * b.cost + w.residual * b.residual + w.boundary * b.boundary +
            w.observation * b.observation;
        CHECK(b.total == doctest::Approx(recomputed).epsilon(1e-12));
        CHECK(b.residual >= 0.0);
        CHECK(b.boundary >= 0.0);
    }

    TEST_CASE("all weights zero gives zero loss") {
        ControlProblem p = builtin_problem("ide");
        p.weights = {0.0, 0.0, 0.0, 0.0};
        Setup s(std::move(p), "kan");
        const LossBreakdown b = s.assembler->breakdown(s.store.flatten());
        CHECK(b.total == 0.0);
    }

    TEST_CASE("zero network against a unit initial condition gives boundary term one") {
        ControlProblem p = builtin_problem("ide");  // condition x(0) = 1
        p.weights = {0.0, 0.0, 1.0, 0.0};
        Setup s(std::move(p), "kan");
        // zero every parameter: the KAN output is identically zero
        std::vector<double> x(s.store.size(), 0.0);
        const LossBreakdown b = s.assembler->breakdown(x);
        CHECK(b.boundary == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(b.total == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("doubling the boundary weight doubles its contribution") {
        ControlProblem p1 = builtin_problem("ide");
        ControlProblem p2 = p1;
        p2.weights.boundary *= 2.0;
        Setup a(p1, "kan"), b(p2, "kan");
        const auto ba = a.assembler->breakdown(a.store.flatten());
        const auto bb = b.assembler->breakdown(b.store.flatten());
        CHECK(ba.boundary == doctest::Approx(bb.boundary).epsilon(1e-13));
        CHECK(bb.total - ba.total ==
              doctest::Approx(p1.weights.boundary * ba.boundary).epsilon(1e-10));
    }

    TEST_CASE("assembled gradient matches finite differences on every builtin") {
        Rng rng(2024);
        for (const std::string id : {"frac_forward", "frac_inverse", "ide", "pde2d", "heat2d"}) {
            LossAssembler::Options opts;
            if (id.rfind("frac", 0) == 0) opts.frac_grid = 80;
            if (id == "pde2d") opts.quad_order = 8;
            if (id == "heat2d") opts.quad_order = 4;
            Setup s(id, "kan", opts);
            std::vector<double> x = s.store.flatten();
            for (double& v : x) v += 0.05 * rng.normal();  // random parameter point
            std::vector<double> grad(x.size());
            s.assembler->eval(x, grad);
            const double h = 1e-5;
            double worst = 0.0;
            for (int probe = 0; probe < 20; ++probe) {
                const std::size_t i =
                    static_cast<std::size_t>(rng.uniform01() * static_cast<double>(x.size()));
                std::vector<double> xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                const double fp = s.assembler->breakdown(xp).total;
                const double fm = s.assembler->breakdown(xm).total;
                const double fd = (fp - fm) / (2 * h);
                worst = std::max(worst, std::abs(grad[i] - fd) / (1.0 + std::abs(grad[i])));
            }
            INFO(id, " worst rel grad err ", worst);
            CHECK(worst < 1e-5);
        }
    }

    TEST_CASE("terminal cost participates in the cost term") {
        // synthetic problem: x' = u on [0,1], terminal G = (x(1) - 2)^2
        ControlProblem p;
        p.name = "terminal_test";
        p.dim = 1;
        p.lo = {0.0};
        p.hi = {1.0};
        p.states = 1;
        const Expr t = Expr::coord(0);
        p.cost = sq(Expr::control() - 1.0);
        p.terminal = sq(Expr::state(0) - 2.0);
        p.residuals.push_back({std::nullopt, Expr::partial(0, 0, 1), Expr::control()});
        p.conditions.push_back({0, 0.0, 0, Expr::constant(1.0)});
        p.exact_control = Expr::constant(1.0);
        p.exact_states = {1.0 + t};
        p.grids = {16, 0, 10, 200};
        p.validate();

        Setup zero(p, "kan");
        std::vector<double> x(zero.store.size(), 0.0);
        const LossBreakdown b = zero.assembler->breakdown(x);
        // zero net: cost integrand (u-1)^2 = 1, terminal (0-2)^2 = 4
        CHECK(b.cost == doctest::Approx(5.0).epsilon(1e-10));

        // and the full pipeline drives it near the optimum
        TrainConfig tc;
        tc.max_iterations = 600;
        const TrainResult r = train(p, tc, 1);
        CHECK(r.final_loss.total < 1e-4);
        CHECK(*r.mae_control < 5e-3);
    }

    TEST_CASE("exact-solution-fitted networks beat fresh initialization by 100x") {
        for (const std::string id : {"frac_forward", "frac_inverse", "ide", "pde2d", "heat2d"}) {
            LossAssembler::Options opts;
            if (id.rfind("frac", 0) == 0) opts.frac_grid = 250;
            if (id == "pde2d") opts.quad_order = 10;
            if (id == "heat2d") opts.quad_order = 5;
            Setup s(id, "kan", opts);
            const double fresh = s.assembler->breakdown(s.store.flatten()).total;

            const int fit_pts = s.problem.dim == 1 ? 120 : (s.problem.dim == 2 ? 25 : 12);
            fit_network_to(*s.nets[0], s.store, s.problem.exact_control, s.problem.lo,
                           s.problem.hi, fit_pts, 250);
            for (int st = 0; st < s.problem.states; ++st)
                fit_network_to(*s.nets[st + 1], s.store, s.problem.exact_states[st], s.problem.lo,
                               s.problem.hi, fit_pts, 250);
            for (const auto& sc : s.problem.scalars)
                if (sc.reference) s.store[s.store.slice(sc.name).offset] = *sc.reference;
            const double fitted = s.assembler->breakdown(s.store.flatten()).total;
            INFO(id, ": fresh=", fresh, " fitted=", fitted);
            CHECK(fitted * 100.0 <= fresh);
        }
    }

    TEST_CASE("fitted networks give small cost and residual terms on frac_forward") {
        Setup s("frac_forward");  // full M = 2000
        fit_network_to(*s.nets[0], s.store, s.problem.exact_control, s.problem.lo, s.problem.hi,
                       160, 400);
        fit_network_to(*s.nets[1], s.store, s.problem.exact_states[0], s.problem.lo, s.problem.hi,
                       160, 400);
        fit_network_to(*s.nets[2], s.store, s.problem.exact_states[1], s.problem.lo, s.problem.hi,
                       160, 400);
        const LossBreakdown b = s.assembler->breakdown(s.store.flatten());
        INFO("J=", b.cost, " residual=", b.residual);
        CHECK(b.cost <= 1e-4);
        CHECK(b.residual <= 1e-2);
    }

    TEST_CASE("training trace is deterministic bit-for-bit") {
        ControlProblem p = builtin_problem("ide");
        TrainConfig tc;
        tc.max_iterations = 40;
        const TrainResult a = train(p, tc, 5);
        const TrainResult b = train(p, tc, 5);
        REQUIRE(a.trace.size() == b.trace.size());
        for (std::size_t i = 0; i < a.trace.size(); ++i) {
            CHECK(a.trace[i].loss.total == b.trace[i].loss.total);
            CHECK(a.trace[i].loss.cost == b.trace[i].loss.cost);
        }
        CHECK(a.store->flatten() == b.store->flatten());
    }

    TEST_CASE("non-finite loss reports the offending term") {
        // force an overflow through a huge parameter value in an MLP
        ControlProblem p = builtin_problem("ide");
        Setup s(std::move(p), "mlp");
        std::vector<double> x(s.store.size(), 0.0);
        for (auto& v : x) v = 1e200;
        CHECK_THROWS_WITH_AS(s.assembler->breakdown(x), doctest::Contains("term at point"),
                             std::runtime_error);
    }
}
