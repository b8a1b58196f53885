#include "kanoc/caputo.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace kanoc {

double gamma_fn(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("gamma_fn: requires x > 0");
    return std::tgamma(x);
}

CaputoMatrix::CaputoMatrix(double alpha, std::span<const double> grid) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("CaputoMatrix: alpha must be in (0, 1)");
    if (grid.size() < 2) throw std::invalid_argument("CaputoMatrix: need at least two grid points");
    for (std::size_t j = 1; j < grid.size(); ++j)
        if (!(grid[j] > grid[j - 1]))
            throw std::invalid_argument("CaputoMatrix: grid must be strictly increasing");
    grid_.assign(grid.begin(), grid.end());

    const std::size_t m = grid_.size();
    offsets_.resize(m);
    std::size_t total = 0;
    for (std::size_t i = 0; i < m; ++i) {
        offsets_[i] = total;
        total += i + 1;
    }
    packed_.assign(total, 0.0);

    const double g = 1.0 / gamma_fn(2.0 - alpha);
    const double e = 1.0 - alpha;
    // lambda_k = ((t_i - t_k)^(1-a) - (t_i - t_{k+1})^(1-a)) / (t_{k+1} - t_k);
    // column regrouping of sum_k lambda_k (f_{k+1} - f_k) / Gamma(2-a)
    std::vector<double> lambda;
    for (std::size_t i = 1; i < m; ++i) {
        lambda.resize(i);
        for (std::size_t k = 0; k < i; ++k) {
            const double a = std::pow(grid_[i] - grid_[k], e);
            const double b = (k + 1 == i) ? 0.0 : std::pow(grid_[i] - grid_[k + 1], e);
            lambda[k] = (a - b) / (grid_[k + 1] - grid_[k]);
        }
        double* row = packed_.data() + offsets_[i];
        row[0] = -lambda[0] * g;
        for (std::size_t k = 1; k < i; ++k) row[k] = (lambda[k - 1] - lambda[k]) * g;
        row[i] = lambda[i - 1] * g;
    }
}

std::span<const double> CaputoMatrix::row(std::size_t i) const {
    if (i >= grid_.size()) throw std::out_of_range("CaputoMatrix: row out of range");
    return {packed_.data() + offsets_[i], i + 1};
}

std::vector<double> CaputoMatrix::apply(std::span<const double> values) const {
    if (values.size() != grid_.size())
        throw std::invalid_argument("CaputoMatrix: value count does not match the grid");
    std::vector<double> out(grid_.size(), 0.0);
    for (std::size_t i = 1; i < grid_.size(); ++i) {
        const double* row = packed_.data() + offsets_[i];
        double acc = 0.0;
        for (std::size_t k = 0; k <= i; ++k) acc += row[k] * values[k];
        out[i] = acc;
    }
    return out;
}

std::vector<Var> CaputoMatrix::apply(Tape& tape, std::span<const Var> values) const {
    if (values.size() != grid_.size())
        throw std::invalid_argument("CaputoMatrix: value count does not match the grid");
    Var first{};
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Var c = tape.copy(values[i]);
        if (i == 0) first = c;
    }
    std::vector<Var> out;
    out.reserve(values.size());
    out.push_back(tape.constant(0.0));  // row 0 is zero
    for (std::size_t i = 1; i < values.size(); ++i)
        out.push_back(tape.lin_row(first, static_cast<std::int32_t>(i + 1),
                                   packed_.data() + offsets_[i]));
    return out;
}

void CaputoMatrix::export_csv(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("CaputoMatrix: cannot open " + path);
    const std::size_t m = grid_.size();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = packed_.data() + offsets_[i];
        for (std::size_t j = 0; j < m; ++j) {
            const double v = (j <= i && i > 0) ? row[j] : 0.0;
            std::fprintf(f, j + 1 < m ? "%.17g," : "%.17g\n", v);
        }
    }
    std::fclose(f);
}

}  // namespace kanoc
