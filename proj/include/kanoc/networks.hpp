#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kanoc/bspline.hpp"
#include "kanoc/param_store.hpp"
#include "kanoc/tape.hpp"

namespace kanoc {

/// Scalar-field approximator over [-1, 1]^d. Parameters live in a named
/// ParameterStore slice; graph building and plain numeric evaluation share
/// the same parameter layout.
class Network {
public:
    virtual ~Network() = default;

    const std::vector<int>& widths() const { return widths_; }
    std::size_t param_count() const { return param_count_; }
    const std::string& slice_name() const { return slice_name_; }
    std::size_t offset() const { return offset_; }
    std::uint64_t seed() const { return seed_; }

    void register_params(ParameterStore& store, std::string name);
    virtual void init(ParameterStore& store, std::uint64_t seed) = 0;

    /// Appends the forward graph at one input point (inputs already scaled to
    /// [-1, 1]^d); returns one Var per output.
    virtual std::vector<Var> build(Tape& tape, std::span<const Var> inputs,
                                   const ParameterStore& store) const = 0;
    /// Plain numeric forward pass for evaluation grids.
    virtual std::vector<double> eval(const ParameterStore& store,
                                     std::span<const double> inputs) const = 0;

    virtual std::string kind() const = 0;

    Var build_scalar(Tape& tape, std::span<const Var> inputs, const ParameterStore& store) const;
    double eval_scalar(const ParameterStore& store, std::span<const double> inputs) const;

protected:
    Network(std::vector<int> widths, std::size_t param_count);

    std::vector<int> widths_;
    std::size_t param_count_ = 0;
    std::string slice_name_;
    std::size_t offset_ = 0;
    bool registered_ = false;
    std::uint64_t seed_ = 0;
};

/// Kolmogorov-Arnold layer stack: every edge carries w_b * silu(x) +
/// w_s * spline(x), nodes sum their incoming edges. Per-edge parameters are
/// laid out as [c_0..c_{G+k-1}, w_b, w_s], edges ordered by (layer, out, in).
class KanNetwork : public Network {
public:
    KanNetwork(std::vector<int> widths, int degree = 3, int grid_intervals = 5);

    int degree() const { return basis_.degree(); }
    int grid_intervals() const { return basis_.intervals(); }
    const BSplineBasis& basis() const { return basis_; }
    std::size_t edge_count() const { return edge_count_; }

    void init(ParameterStore& store, std::uint64_t seed) override;
    std::vector<Var> build(Tape& tape, std::span<const Var> inputs,
                           const ParameterStore& store) const override;
    std::vector<double> eval(const ParameterStore& store,
                             std::span<const double> inputs) const override;
    std::string kind() const override { return "kan"; }

private:
    std::size_t edge_params() const { return static_cast<std::size_t>(basis_.count()) + 2; }

    BSplineBasis basis_;
    std::size_t edge_count_ = 0;
};

/// Baseline multilayer perceptron: tanh hidden activations, linear output.
/// Per-layer parameters: weight matrix (row-major, out x in) then bias.
class MlpNetwork : public Network {
public:
    explicit MlpNetwork(std::vector<int> widths);

    void init(ParameterStore& store, std::uint64_t seed) override;
    std::vector<Var> build(Tape& tape, std::span<const Var> inputs,
                           const ParameterStore& store) const override;
    std::vector<double> eval(const ParameterStore& store,
                             std::span<const double> inputs) const override;
    std::string kind() const override { return "mlp"; }
};

std::unique_ptr<Network> make_network(const std::string& kind, std::vector<int> widths,
                                      int degree = 3, int grid_intervals = 5);

/// Writes widths/degree/grid/seed header plus the parameter values as JSON.
void save_network(const Network& net, const ParameterStore& store, const std::string& path);
/// Rebuilds the network and returns its parameter values (in layout order).
std::pair<std::unique_ptr<Network>, std::vector<double>> load_network(const std::string& path);

}  // namespace kanoc
