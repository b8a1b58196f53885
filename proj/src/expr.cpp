#include "kanoc/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace kanoc {

Expr Expr::make_node(ExprNode n) {
    return Expr(std::make_shared<const ExprNode>(std::move(n)));
}

Expr Expr::constant(double v) {
    ExprNode n;
    n.kind = ExprKind::kConst;
    n.value = v;
    return make_node(std::move(n));
}
Expr Expr::coord(int dim) {
    ExprNode n;
    n.kind = ExprKind::kCoord;
    n.a = dim;
    return make_node(std::move(n));
}
Expr Expr::state(int index) {
    ExprNode n;
    n.kind = ExprKind::kState;
    n.a = index;
    return make_node(std::move(n));
}
Expr Expr::control() {
    ExprNode n;
    n.kind = ExprKind::kControl;
    return make_node(std::move(n));
}
Expr Expr::scalar(std::string name) {
    ExprNode n;
    n.kind = ExprKind::kScalar;
    n.name = std::move(name);
    return make_node(std::move(n));
}
Expr Expr::inner_var() {
    ExprNode n;
    n.kind = ExprKind::kInner;
    return make_node(std::move(n));
}
Expr Expr::partial(int state, int dim, int order) {
    if (order < 1 || order > 2) throw std::invalid_argument("Expr: partial order must be 1 or 2");
    ExprNode n;
    n.kind = ExprKind::kPartial;
    n.a = state;
    n.b = dim;
    n.c = order;
    return make_node(std::move(n));
}
Expr Expr::volterra(Expr kernel, int state) {
    ExprNode n;
    n.kind = ExprKind::kVolterra;
    n.a = state;
    n.lhs = std::move(kernel);
    return make_node(std::move(n));
}
Expr Expr::unary(ExprKind kind, Expr a) {
    ExprNode n;
    n.kind = kind;
    n.lhs = std::move(a);
    return make_node(std::move(n));
}
Expr Expr::binary(ExprKind kind, Expr a, Expr b) {
    ExprNode n;
    n.kind = kind;
    n.lhs = std::move(a);
    n.rhs = std::move(b);
    return make_node(std::move(n));
}
Expr Expr::pow(Expr a, double exponent) {
    ExprNode n;
    n.kind = ExprKind::kPow;
    n.value = exponent;
    n.lhs = std::move(a);
    return make_node(std::move(n));
}

const ExprNode& Expr::node() const {
    if (!node_) throw std::logic_error("Expr: empty expression");
    return *node_;
}

Var Expr::build(Tape& tape, const BuildCtx& ctx) const {
    const ExprNode& n = node();
    switch (n.kind) {
        case ExprKind::kConst:
            return tape.constant(n.value);
        case ExprKind::kCoord:
            if (n.a < 0 || static_cast<std::size_t>(n.a) >= ctx.coords.size())
                throw std::out_of_range("Expr: coordinate index out of range");
            return ctx.coords[n.a];
        case ExprKind::kState:
            if (n.a < 0 || static_cast<std::size_t>(n.a) >= ctx.states.size())
                throw std::out_of_range("Expr: state index out of range");
            return ctx.states[n.a];
        case ExprKind::kControl:
            if (!ctx.control.valid()) throw std::logic_error("Expr: control not available here");
            return ctx.control;
        case ExprKind::kScalar:
            if (!ctx.scalar) throw std::logic_error("Expr: scalar '" + n.name + "' not available here");
            return ctx.scalar(n.name);
        case ExprKind::kInner:
            throw std::logic_error("Expr: integration variable outside a kernel");
        case ExprKind::kPartial:
            if (!ctx.partial) throw std::logic_error("Expr: state derivatives not available here");
            return ctx.partial(n.a, n.b, n.c);
        case ExprKind::kVolterra:
            if (!ctx.volterra) throw std::logic_error("Expr: integral terms not available here");
            return ctx.volterra(n.lhs, n.a);
        case ExprKind::kAdd:
            return n.lhs.build(tape, ctx) + n.rhs.build(tape, ctx);
        case ExprKind::kSub:
            return n.lhs.build(tape, ctx) - n.rhs.build(tape, ctx);
        case ExprKind::kMul:
            return n.lhs.build(tape, ctx) * n.rhs.build(tape, ctx);
        case ExprKind::kDiv:
            return n.lhs.build(tape, ctx) / n.rhs.build(tape, ctx);
        case ExprKind::kNeg:
            return -n.lhs.build(tape, ctx);
        case ExprKind::kPow:
            return tape.pow(n.lhs.build(tape, ctx), n.value);
        case ExprKind::kExp:
            return tape.exp(n.lhs.build(tape, ctx));
        case ExprKind::kLog:
            return tape.log(n.lhs.build(tape, ctx));
        case ExprKind::kSin:
            return tape.sin(n.lhs.build(tape, ctx));
        case ExprKind::kCos:
            return tape.cos(n.lhs.build(tape, ctx));
        case ExprKind::kSqrt:
            return tape.sqrt(n.lhs.build(tape, ctx));
        case ExprKind::kSigmoid:
            return tape.sigmoid(n.lhs.build(tape, ctx));
        case ExprKind::kSilu:
            return tape.silu(n.lhs.build(tape, ctx));
    }
    throw std::logic_error("Expr: unknown node kind");
}

double Expr::eval(const EvalCtx& ctx) const {
    const ExprNode& n = node();
    switch (n.kind) {
        case ExprKind::kConst:
            return n.value;
        case ExprKind::kCoord:
            if (n.a < 0 || static_cast<std::size_t>(n.a) >= ctx.coords.size())
                throw std::out_of_range("Expr: coordinate index out of range");
            return ctx.coords[n.a];
        case ExprKind::kState:
            if (!ctx.state) throw std::logic_error("Expr: state values not available here");
            return ctx.state(n.a);
        case ExprKind::kControl:
            if (!ctx.control) throw std::logic_error("Expr: control not available here");
            return ctx.control();
        case ExprKind::kScalar:
            if (!ctx.scalar) throw std::logic_error("Expr: scalar '" + n.name + "' not available here");
            return ctx.scalar(n.name);
        case ExprKind::kInner:
            return ctx.inner;
        case ExprKind::kPartial:
            if (!ctx.partial) throw std::logic_error("Expr: state derivatives not available here");
            return ctx.partial(n.a, n.b, n.c);
        case ExprKind::kVolterra:
            if (!ctx.volterra) throw std::logic_error("Expr: integral terms not available here");
            return ctx.volterra(n.lhs, n.a);
        case ExprKind::kAdd:
            return n.lhs.eval(ctx) + n.rhs.eval(ctx);
        case ExprKind::kSub:
            return n.lhs.eval(ctx) - n.rhs.eval(ctx);
        case ExprKind::kMul:
            return n.lhs.eval(ctx) * n.rhs.eval(ctx);
        case ExprKind::kDiv:
            return n.lhs.eval(ctx) / n.rhs.eval(ctx);
        case ExprKind::kNeg:
            return -n.lhs.eval(ctx);
        case ExprKind::kPow:
            return std::pow(n.lhs.eval(ctx), n.value);
        case ExprKind::kExp:
            return std::exp(n.lhs.eval(ctx));
        case ExprKind::kLog:
            return std::log(n.lhs.eval(ctx));
        case ExprKind::kSin:
            return std::sin(n.lhs.eval(ctx));
        case ExprKind::kCos:
            return std::cos(n.lhs.eval(ctx));
        case ExprKind::kSqrt:
            return std::sqrt(n.lhs.eval(ctx));
        case ExprKind::kSigmoid: {
            const double x = n.lhs.eval(ctx);
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        }
        case ExprKind::kSilu: {
            const double x = n.lhs.eval(ctx);
            const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            return x * s;
        }
    }
    throw std::logic_error("Expr: unknown node kind");
}

double Expr::eval_at(std::span<const double> coords) const {
    EvalCtx ctx;
    ctx.coords = coords;
    return eval(ctx);
}

void Expr::visit(const std::function<void(const ExprNode&)>& fn) const {
    if (!node_) return;
    fn(*node_);
    if (!node_->lhs.empty()) node_->lhs.visit(fn);
    if (!node_->rhs.empty()) node_->rhs.visit(fn);
}

// ------------------------------------------------------------------ parser

namespace {

struct Parser {
    const std::string& text;
    const ExprSymbols& sym;
    std::size_t pos = 0;
    bool in_kernel = false;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!eat(c))
            throw std::invalid_argument("expression parse error: expected '" + std::string(1, c) +
                                        "' near position " + std::to_string(pos) + " in '" + text + "'");
    }
    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("expression parse error: " + what + " near position " +
                                    std::to_string(pos) + " in '" + text + "'");
    }

    Expr parse() {
        Expr e = sum();
        skip_ws();
        if (pos != text.size()) fail("trailing input");
        return e;
    }

    Expr sum() {
        Expr e = term();
        for (;;) {
            if (eat('+'))
                e = e + term();
            else if (eat('-'))
                e = e - term();
            else
                return e;
        }
    }

    Expr term() {
        Expr e = unary();
        for (;;) {
            if (eat('*'))
                e = e * unary();
            else if (eat('/'))
                e = e / unary();
            else
                return e;
        }
    }

    Expr unary() {
        if (eat('-')) return -unary();
        return power();
    }

    Expr power() {
        Expr base = atom();
        skip_ws();
        if (eat('^')) {
            skip_ws();
            double sign = 1.0;
            if (eat('-')) sign = -1.0;
            const double e = number();
            return Expr::pow(std::move(base), sign * e);
        }
        return base;
    }

    double number() {
        skip_ws();
        const char* start = text.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(start, &end);
        if (end == start) fail("expected a number");
        pos += static_cast<std::size_t>(end - start);
        return v;
    }

    std::string ident() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        if (pos == start) fail("expected an identifier");
        return text.substr(start, pos - start);
    }

    int state_index(const std::string& name) {
        if (name == "x" && sym.states == 1) return 0;
        if (name.size() >= 2 && name[0] == 'x') {
            const int i = std::atoi(name.c_str() + 1);
            if (i >= 1 && i <= sym.states) return i - 1;
        }
        fail("unknown state '" + name + "'");
    }

    int coord_index(const std::string& name) {
        if (name == "t") return sym.dim - 1;  // time is the last coordinate
        if (name.size() >= 2 && name[0] == 't') {
            const int i = std::atoi(name.c_str() + 1);
            if (i >= 1 && i <= sym.dim) return i - 1;
        }
        if (name.size() >= 2 && name[0] == 'z') {  // space coordinates in 2D/3D
            const int i = std::atoi(name.c_str() + 1);
            if (i >= 1 && i <= sym.dim - 1) return i - 1;
        }
        fail("unknown coordinate '" + name + "'");
    }

    Expr atom() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        const char c = text[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr::constant(number());
        if (c == '(') {
            ++pos;
            Expr e = sum();
            expect(')');
            return e;
        }
        const std::string name = ident();
        skip_ws();
        const bool call = pos < text.size() && text[pos] == '(';

        if (!call) {
            if (name == "pi") return Expr::constant(3.14159265358979323846);
            if (name == "u") return Expr::control();
            if (name == "s") {
                if (!(sym.allow_inner || in_kernel)) fail("integration variable outside a kernel");
                return Expr::inner_var();
            }
            if (sym.scalars.count(name)) return Expr::scalar(name);
            if (name[0] == 'x') return Expr::state(state_index(name));
            if (name[0] == 't' || name[0] == 'z') return Expr::coord(coord_index(name));
            fail("unknown identifier '" + name + "'");
        }

        expect('(');
        if (name == "dt" || name == "dx" || name == "dxx") {
            if (!sym.allow_partials) fail("derivative atoms not allowed here");
            const int st = state_index(ident());
            int dim = sym.dim - 1;
            if (name != "dt") {
                expect(',');
                dim = coord_index(ident());
            }
            expect(')');
            return Expr::partial(st, dim, name == "dxx" ? 2 : 1);
        }
        if (name == "vint") {
            if (!sym.allow_volterra) fail("integral atoms not allowed here");
            if (sym.dim != 1) fail("vint is only supported for one-dimensional problems");
            const bool saved = in_kernel;
            in_kernel = true;
            Expr kernel = sum();
            in_kernel = saved;
            expect(';');
            const int st = state_index(ident());
            expect(')');
            return Expr::volterra(std::move(kernel), st);
        }
        Expr argument = sum();
        expect(')');
        if (name == "exp") return exp(std::move(argument));
        if (name == "log" || name == "ln") return log(std::move(argument));
        if (name == "sin") return sin(std::move(argument));
        if (name == "cos") return cos(std::move(argument));
        if (name == "sqrt") return sqrt(std::move(argument));
        if (name == "sigmoid") return sigmoid(std::move(argument));
        if (name == "silu") return silu(std::move(argument));
        fail("unknown function '" + name + "'");
    }
};

}  // namespace

Expr parse_expr(const std::string& text, const ExprSymbols& symbols) {
    Parser p{text, symbols};
    return p.parse();
}

}  // namespace kanoc
