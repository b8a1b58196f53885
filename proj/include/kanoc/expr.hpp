#pragma once

#include <functional>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kanoc/tape.hpp"

namespace kanoc {

enum class ExprKind : std::uint8_t {
    kConst,
    kCoord,     // problem coordinate (a = dimension)
    kState,     // state value (a = state index)
    kControl,   // control value
    kScalar,    // named trainable scalar
    kInner,     // integration variable inside Volterra kernels
    kPartial,   // partial derivative of a state (a = state, b = dim, c = order)
    kVolterra,  // Volterra integral of a state with a kernel expression
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kPow,  // constant real exponent in value
    kExp,
    kLog,
    kSin,
    kCos,
    kSqrt,
    kSigmoid,
    kSilu,
};

struct ExprNode;

/// Immutable closed-form expression tree over the autodiff primitive set.
/// Problem definitions (cost integrands, dynamics right-hand sides, boundary
/// targets, exact solutions) are held in this form; they can be instantiated
/// as tape graphs or evaluated numerically.
class Expr {
public:
    Expr() = default;

    static Expr constant(double v);
    static Expr coord(int dim);
    static Expr state(int index);
    static Expr control();
    static Expr scalar(std::string name);
    static Expr inner_var();
    static Expr partial(int state, int dim, int order);
    static Expr volterra(Expr kernel, int state);

    static Expr unary(ExprKind kind, Expr a);
    static Expr binary(ExprKind kind, Expr a, Expr b);
    static Expr pow(Expr a, double exponent);

    bool empty() const { return node_ == nullptr; }
    const ExprNode& node() const;

    /// Resolution hooks for graph building; entries may be left empty when the
    /// expression cannot reference them.
    struct BuildCtx {
        std::span<const Var> coords;
        std::span<const Var> states;
        Var control{};
        std::function<Var(const std::string&)> scalar;
        std::function<Var(int state, int dim, int order)> partial;
        std::function<Var(const Expr& kernel, int state)> volterra;
    };
    Var build(Tape& tape, const BuildCtx& ctx) const;

    struct EvalCtx {
        std::span<const double> coords;
        std::function<double(int)> state;
        std::function<double()> control;
        std::function<double(const std::string&)> scalar;
        std::function<double(int state, int dim, int order)> partial;
        std::function<double(const Expr& kernel, int state)> volterra;
        double inner = 0.0;
    };
    double eval(const EvalCtx& ctx) const;

    /// Convenience for coordinate-only expressions (exact solutions, sources).
    double eval_at(std::span<const double> coords) const;

    void visit(const std::function<void(const ExprNode&)>& fn) const;

private:
    explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
    static Expr make_node(ExprNode n);
    std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
    ExprKind kind;
    double value = 0.0;  // constant or pow exponent
    int a = 0;           // state / dim index
    int b = 0;
    int c = 0;
    std::string name;
    Expr lhs, rhs;  // children; volterra kernel lives in lhs
};

inline Expr operator+(Expr a, Expr b) { return Expr::binary(ExprKind::kAdd, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(ExprKind::kSub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(ExprKind::kMul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(ExprKind::kDiv, std::move(a), std::move(b)); }
inline Expr operator-(Expr a) { return Expr::unary(ExprKind::kNeg, std::move(a)); }
inline Expr operator+(Expr a, double c) { return std::move(a) + Expr::constant(c); }
inline Expr operator+(double c, Expr a) { return Expr::constant(c) + std::move(a); }
inline Expr operator-(Expr a, double c) { return std::move(a) - Expr::constant(c); }
inline Expr operator-(double c, Expr a) { return Expr::constant(c) - std::move(a); }
inline Expr operator*(Expr a, double c) { return std::move(a) * Expr::constant(c); }
inline Expr operator*(double c, Expr a) { return Expr::constant(c) * std::move(a); }
inline Expr operator/(Expr a, double c) { return std::move(a) / Expr::constant(c); }
inline Expr operator/(double c, Expr a) { return Expr::constant(c) / std::move(a); }

inline Expr exp(Expr a) { return Expr::unary(ExprKind::kExp, std::move(a)); }
inline Expr log(Expr a) { return Expr::unary(ExprKind::kLog, std::move(a)); }
inline Expr sin(Expr a) { return Expr::unary(ExprKind::kSin, std::move(a)); }
inline Expr cos(Expr a) { return Expr::unary(ExprKind::kCos, std::move(a)); }
inline Expr sqrt(Expr a) { return Expr::unary(ExprKind::kSqrt, std::move(a)); }
inline Expr sigmoid(Expr a) { return Expr::unary(ExprKind::kSigmoid, std::move(a)); }
inline Expr silu(Expr a) { return Expr::unary(ExprKind::kSilu, std::move(a)); }
inline Expr pow(Expr a, double e) { return Expr::pow(std::move(a), e); }
inline Expr sq(Expr a) { return a * a; }

/// Symbols available to the expression parser.
struct ExprSymbols {
    int dim = 1;
    int states = 1;
    std::set<std::string> scalars;
    bool allow_inner = false;     // integration variable `s`
    bool allow_partials = true;   // dt()/dx()/dxx() atoms
    bool allow_volterra = true;   // vint(kernel; state)
};

/// Parses the documented expression grammar: coordinates t1..td (alias t and,
/// in 2D/3D, z1/z2 for the space coordinates), states x1..xn (alias x), the
/// control u, named scalars, numbers, pi, + - * / ^const, parentheses, the
/// functions exp/log/ln/sin/cos/sqrt/sigmoid/silu, derivative atoms
/// dt(x1), dx(x1, t1), dxx(x1, t1), and vint(kernel; x1).
Expr parse_expr(const std::string& text, const ExprSymbols& symbols);

}  // namespace kanoc
