#include "kanoc/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kanoc {

BSplineBasis::BSplineBasis(int degree, int intervals, double lo, double hi)
    : degree_(degree), intervals_(intervals), lo_(lo), hi_(hi) {
    if (degree < 0 || degree > kMaxDegree)
        throw std::invalid_argument("BSplineBasis: degree out of range");
    if (intervals < 1) throw std::invalid_argument("BSplineBasis: need at least one interval");
    if (!(lo < hi)) throw std::invalid_argument("BSplineBasis: empty interval");
    const double h = (hi - lo) / intervals;
    const int m = intervals + 2 * degree;  // knots_.size() - 1
    knots_.resize(m + 1);
    for (int j = 0; j <= m; ++j) knots_[j] = lo + (j - degree) * h;
    // pin the base-interval endpoints exactly
    knots_[degree] = lo;
    knots_[m - degree] = hi;
}

int BSplineBasis::find_span(double x) const {
    const int p = degree_;
    const int m = static_cast<int>(knots_.size()) - 1;
    const int hi_span = m - p - 1;
    if (x >= knots_[m - p]) return hi_span;
    if (x <= knots_[p]) return p;
    // binary search: knots_[i] <= x < knots_[i+1]
    int lo = p, hi = hi_span;
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (knots_[mid] <= x)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

// Basis values and derivatives on the active window, by the standard
// knot-difference triangle (Cox-de Boor recursion with derivative folding).
BSplineBasis::Window BSplineBasis::eval_window(double x, int max_order) const {
    if (max_order > kMaxOrder) throw std::invalid_argument("BSplineBasis: derivative order too high");
    Window out;
    double u = x;
    if (u < lo_) {
        u = lo_;
        out.clamped = true;
    } else if (u > hi_) {
        u = hi_;
        out.clamped = true;
    }
    const int p = degree_;
    const int span = find_span(u);
    out.first = span - p;

    double ndu[kMaxDegree + 1][kMaxDegree + 1];
    double left[kMaxDegree + 1], right[kMaxDegree + 1];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - knots_[span + 1 - j];
        right[j] = knots_[span + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for (int j = 0; j <= p; ++j) out.ders[0][j] = ndu[j][p];

    const int n = std::min(max_order, p);  // derivatives beyond the degree are zero
    double a[2][kMaxDegree + 1];
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= n; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            out.ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= n; ++k) {
        for (int j = 0; j <= p; ++j) out.ders[k][j] *= factor;
        factor *= (p - k);
    }
    for (int k = n + 1; k <= max_order; ++k)
        for (int j = 0; j <= p; ++j) out.ders[k][j] = 0.0;
    return out;
}

std::vector<double> BSplineBasis::eval_all(double x, int order) const {
    std::vector<double> vals(count(), 0.0);
    const Window w = eval_window(x, order);
    for (int j = 0; j <= degree_; ++j) vals[w.first + j] = w.ders[order][j];
    return vals;
}

double BSplineBasis::spline(std::span<const double> coeffs, double x, int order) const {
    if (static_cast<int>(coeffs.size()) != count())
        throw std::invalid_argument("BSplineBasis: coefficient count mismatch");
    const Window w = eval_window(x, order);
    if (w.clamped && order >= 1) return 0.0;
    double v = 0.0;
    for (int j = 0; j <= degree_; ++j) v += coeffs[w.first + j] * w.ders[order][j];
    return v;
}

std::vector<double> BSplineBasis::greville() const {
    if (degree_ < 1) throw std::logic_error("BSplineBasis: greville needs degree >= 1");
    std::vector<double> g(count());
    for (int i = 0; i < count(); ++i) {
        double s = 0.0;
        for (int j = 1; j <= degree_; ++j) s += knots_[i + j];
        g[i] = s / degree_;
    }
    return g;
}

}  // namespace kanoc
