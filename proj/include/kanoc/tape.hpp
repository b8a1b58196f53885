#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "kanoc/bspline.hpp"
#include "kanoc/param_store.hpp"

namespace kanoc {

class Tape;

/// Handle to a scalar node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Op : std::uint8_t {
    kConst,
    kInput,
    kParam,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kExp,
    kLog,
    kSin,
    kCos,
    kSqrt,
    kPow,  // real constant exponent
    kSigmoid,
    kSilu,
    kTanh,
    kCopy,
    kLinComb,  // sum of coeff*arg over an argument pool slice
    kLinRow,   // coeff row applied to a contiguous node block
    kSpline,   // B-spline dot product, order 0..2 (fused primitive)
};

/// Differentiable scalar computation graph.
///
/// Nodes are appended in topological order and evaluated eagerly at
/// construction, so a freshly built graph already carries values. When leaf
/// values change (new parameters from the optimizer, or set_input), forward()
/// recomputes every derived node in place; the graph itself is never rebuilt.
/// backward() runs one reverse sweep and exposes exact adjoints for every
/// parameter and input leaf. pushforward() appends tangent nodes (forward-mode
/// derivative rules expressed as graph operations), which is how first and
/// second derivatives with respect to inputs stay differentiable with respect
/// to parameters.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- leaves ----
    Var constant(double v);  // deduplicated by bit pattern
    Var input(double v);
    Var param(const ParameterStore& store, std::size_t index);  // deduplicated by index

    // ---- primitives ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var neg(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var sin(Var a);
    Var cos(Var a);
    Var sqrt(Var a);
    Var pow(Var a, double exponent);
    Var sigmoid(Var a);
    Var silu(Var a);
    Var tanh(Var a);
    Var copy(Var a);
    Var lin_comb(std::span<const Var> args, std::span<const double> coeffs);
    /// Sum of coeffs[k] * node(first + k), k = 0..n-1. The coefficient row is
    /// borrowed; it must outlive the tape.
    Var lin_row(Var first, std::int32_t n, const double* coeffs);
    /// Spline value (or its order-th derivative w.r.t. x) with coefficients
    /// taken from the n = basis.count() consecutive nodes starting at
    /// coeff_first. The basis is borrowed and must outlive the tape.
    Var spline(const BSplineBasis& basis, Var coeff_first, Var x, int order = 0);

    // ---- evaluation ----
    std::size_t size() const { return nodes_.size(); }
    std::size_t input_count() const { return inputs_.size(); }
    Var input_var(std::size_t ordinal) const;
    void set_input(std::size_t ordinal, double v);

    /// Recomputes all node values; parameter leaves are refreshed from store.
    void forward(const ParameterStore& store);
    /// Recomputes all node values with parameter leaves left as they are.
    void forward();

    double value(Var v) const;

    /// Reverse sweep seeding d(output)/d(output) = 1. Afterwards adjoint(v)
    /// is d(output)/d(v) for any node, in particular for parameter and input
    /// leaves. Requires node values to be current.
    void backward(Var output);
    double adjoint(Var v) const;

    /// backward() + scatter of parameter-leaf adjoints into a store-sized
    /// gradient vector (entries for unused parameters stay zero).
    void param_gradient(Var output, std::span<double> grad);

    /// Gradient of output with respect to every input leaf, in registration
    /// order. Runs backward().
    std::vector<double> input_gradient(Var output);

    // ---- tangent graphs ----
    /// Appends tangent nodes for every node with id < limit that depends on
    /// the seeded leaves (each seed gets tangent 1; useful seeds living in
    /// disjoint subgraphs can be pushed in one pass). Returns a map from node
    /// id to tangent node id, -1 where the tangent is identically zero.
    /// `prior` extends an existing map from an earlier pass with the same
    /// seeds (used for second derivatives without re-deriving the base).
    std::vector<std::int32_t> pushforward(std::span<const Var> seeds, std::int32_t limit,
                                          const std::vector<std::int32_t>* prior = nullptr);

    Var tangent(const std::vector<std::int32_t>& map, Var v);          // zero -> error
    Var tangent_or_zero(const std::vector<std::int32_t>& map, Var v);  // zero -> constant 0

private:
    struct Node {
        Op op;
        std::int32_t a = -1;
        std::int32_t b = -1;
        double value = 0.0;
        double pa = 0.0;  // cached d(value)/d(arg a) where not cheaply recomputable
        double pb = 0.0;  // kPow: the exponent
    };
    struct SplineSlot {
        const BSplineBasis* basis = nullptr;
        std::int32_t c_first = -1;
        std::int32_t order = 0;
        std::int32_t active_first = 0;
        std::array<double, BSplineBasis::kMaxDegree + 1> pc{};
    };
    struct LinRow {
        const double* coeffs = nullptr;
        std::int32_t n = 0;
    };

    Var push(Op op, std::int32_t a, std::int32_t b);
    void compute(std::size_t i);
    void check(Var v) const;

    std::vector<Node> nodes_;
    std::vector<std::int32_t> inputs_;
    std::vector<std::int32_t> lc_args_;
    std::vector<double> lc_coeffs_;
    std::vector<SplineSlot> spline_slots_;
    std::vector<LinRow> lin_rows_;
    std::vector<double> adjoints_;
    std::unordered_map<std::uint64_t, std::int32_t> const_cache_;
    std::unordered_map<std::size_t, std::int32_t> param_cache_;
};

// Infix helpers for graph building.
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }
inline Var operator+(Var a, double c) { return a + a.tape->constant(c); }
inline Var operator+(double c, Var a) { return a.tape->constant(c) + a; }
inline Var operator-(Var a, double c) { return a - a.tape->constant(c); }
inline Var operator-(double c, Var a) { return a.tape->constant(c) - a; }
inline Var operator*(Var a, double c) { return a * a.tape->constant(c); }
inline Var operator*(double c, Var a) { return a.tape->constant(c) * a; }
inline Var operator/(Var a, double c) { return a / a.tape->constant(c); }
inline Var operator/(double c, Var a) { return a.tape->constant(c) / a; }

/// Exact d^2 output / d input_i d input_j at the current leaf values, via two
/// pushforward passes (input ordinals index the tape's input leaves).
double second_derivative(Tape& tape, Var output, std::size_t i, std::size_t j);

}  // namespace kanoc
