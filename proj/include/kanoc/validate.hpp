#pragma once

#include <string>
#include <vector>

namespace kanoc {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Gauss-Legendre exactness for polynomial degrees 0..2Q-1, Q = 1..16.
SuiteResult validate_quadrature();
/// Caputo operational matrix against the analytic monomial derivative,
/// including the grid-refinement ratio.
SuiteResult validate_caputo();
/// Gradients and second derivatives of random composite graphs against
/// central finite differences; symmetry of mixed second derivatives.
SuiteResult validate_autodiff();
/// B-spline partition of unity and linear reproduction.
SuiteResult validate_bspline();

std::vector<SuiteResult> validate_all();

}  // namespace kanoc
