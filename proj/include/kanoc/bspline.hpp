#pragma once

#include <array>
#include <span>
#include <vector>

namespace kanoc {

/// Uniform B-spline basis of a given degree on a base interval, with the knot
/// grid extended by `degree` knots on each side so that every point of the
/// base interval has a full set of active functions. The number of basis
/// functions is intervals + degree.
class BSplineBasis {
public:
    static constexpr int kMaxDegree = 5;
    static constexpr int kMaxOrder = 3;  // highest derivative order supported

    BSplineBasis(int degree, int intervals, double lo = -1.0, double hi = 1.0);

    int degree() const { return degree_; }
    int intervals() const { return intervals_; }
    int count() const { return intervals_ + degree_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& knots() const { return knots_; }

    /// Values and derivatives of the degree+1 basis functions active at x.
    /// ders[m][j] = m-th derivative of basis function (first + j).
    /// If x is outside [lo, hi] it is clamped and `clamped` is set; callers
    /// decide what clamping means for their derivative semantics.
    struct Window {
        int first = 0;
        bool clamped = false;
        std::array<std::array<double, kMaxDegree + 1>, kMaxOrder + 1> ders{};
    };
    Window eval_window(double x, int max_order) const;

    /// Dense evaluation of all count() basis functions (order-m derivative).
    std::vector<double> eval_all(double x, int order = 0) const;

    /// Spline value sum_i coeffs[i] * B_i^(order)(x); x clamped to the grid,
    /// with derivative orders >= 1 reported as zero outside it.
    double spline(std::span<const double> coeffs, double x, int order = 0) const;

    /// Greville abscissae (knot averages); interpolating f at these with
    /// coefficients f(greville_i) reproduces affine functions exactly.
    std::vector<double> greville() const;

private:
    int find_span(double x) const;

    int degree_;
    int intervals_;
    double lo_, hi_;
    std::vector<double> knots_;
};

}  // namespace kanoc
