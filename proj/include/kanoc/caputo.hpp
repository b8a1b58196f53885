#pragma once

#include <span>
#include <string>
#include <vector>

#include "kanoc/tape.hpp"

namespace kanoc {

/// Gamma function for x > 0 (>= 1e-12 relative accuracy).
double gamma_fn(double x);

/// Lower-triangular operational matrix for the Caputo derivative of order
/// alpha in (0, 1) on a strictly increasing grid (L1 scheme: the state is
/// taken piecewise linear between grid points, and the weakly singular kernel
/// is integrated exactly on each panel). Row 0 is zero; applied to samples of
/// a function on the grid it approximates the Caputo derivative at each grid
/// point. Row sums vanish, so constants are annihilated exactly.
class CaputoMatrix {
public:
    CaputoMatrix(double alpha, std::span<const double> grid);

    double alpha() const { return alpha_; }
    std::size_t size() const { return grid_.size(); }
    const std::vector<double>& grid() const { return grid_; }

    /// Row i has i+1 entries (columns 0..i).
    std::span<const double> row(std::size_t i) const;

    /// Numeric triangular mat-vec.
    std::vector<double> apply(std::span<const double> values) const;
    /// Differentiable application to graph nodes sampled on the grid; the
    /// samples are packed into a contiguous block internally.
    std::vector<Var> apply(Tape& tape, std::span<const Var> values) const;

    /// Dense CSV (for cross-checking against other implementations).
    void export_csv(const std::string& path) const;

private:
    double alpha_;
    std::vector<double> grid_;
    std::vector<double> packed_;        // rows concatenated, row i at offset i(i+1)/2
    std::vector<std::size_t> offsets_;
};

}  // namespace kanoc
