#pragma once

#include <functional>
#include <span>
#include <vector>

namespace kanoc {

struct LbfgsParams {
    int memory = 100;              // curvature-pair history size
    double c1 = 1e-4;              // sufficient-decrease constant
    double c2 = 0.9;               // curvature constant
    int max_iterations = 2000;
    int max_line_search = 25;
    double grad_tol = 1e-9;        // stop when max|g| <= grad_tol
    double step_tol = 1e-11;       // stop when max|t*d| <= step_tol
    double loss_change_tol = 1e-13;  // stop when |df| <= tol * (1 + |f|)
};

enum class LbfgsStatus {
    kConverged,         // gradient norm below tolerance
    kMaxIterations,
    kStalled,           // step or loss change below tolerance
    kLineSearchFailed,  // no strong-Wolfe point found; best point returned
};

const char* to_string(LbfgsStatus s);

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    LbfgsStatus status = LbfgsStatus::kMaxIterations;
    int iterations = 0;
    int evaluations = 0;
};

/// Loss-and-gradient oracle: returns f(x) and fills grad (same length as x).
/// Non-finite returns are treated as +infinity inside the line search.
using LossGradFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Called after every accepted iteration with the new iterate.
using IterCallback = std::function<void(int iteration, std::span<const double> x, double f)>;

/// Limited-memory BFGS with a strong-Wolfe cubic-interpolation line search.
/// Only Wolfe-satisfying steps are accepted, so the accepted loss sequence is
/// strictly decreasing; on a line-search failure the history is dropped and
/// one steepest-descent restart is attempted before giving up gracefully.
LbfgsResult lbfgs_minimize(const LossGradFn& fn, std::vector<double> x0,
                           const LbfgsParams& params = {}, const IterCallback& callback = {});

}  // namespace kanoc
