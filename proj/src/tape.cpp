#include "kanoc/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace kanoc {

namespace {
double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}
}  // namespace

void Tape::check(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<std::int32_t>(nodes_.size()))
        throw std::invalid_argument("Tape: variable does not belong to this tape");
}

Var Tape::push(Op op, std::int32_t a, std::int32_t b) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    nodes_.push_back(n);
    const std::size_t i = nodes_.size() - 1;
    if (op != Op::kConst && op != Op::kInput && op != Op::kParam) compute(i);
    return {this, static_cast<std::int32_t>(i)};
}

Var Tape::constant(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    auto it = const_cache_.find(bits);
    if (it != const_cache_.end()) return {this, it->second};
    Var out = push(Op::kConst, -1, -1);
    nodes_[out.id].value = v;
    const_cache_.emplace(bits, out.id);
    return out;
}

Var Tape::input(double v) {
    Var out = push(Op::kInput, static_cast<std::int32_t>(inputs_.size()), -1);
    nodes_[out.id].value = v;
    inputs_.push_back(out.id);
    return out;
}

Var Tape::param(const ParameterStore& store, std::size_t index) {
    if (index >= store.size()) throw std::out_of_range("Tape: parameter index out of range");
    auto it = param_cache_.find(index);
    if (it != param_cache_.end()) return {this, it->second};
    Var out = push(Op::kParam, static_cast<std::int32_t>(index), -1);
    nodes_[out.id].value = store[index];
    param_cache_.emplace(index, out.id);
    return out;
}

Var Tape::add(Var a, Var b) {
    check(a);
    check(b);
    return push(Op::kAdd, a.id, b.id);
}
Var Tape::sub(Var a, Var b) {
    check(a);
    check(b);
    return push(Op::kSub, a.id, b.id);
}
Var Tape::mul(Var a, Var b) {
    check(a);
    check(b);
    return push(Op::kMul, a.id, b.id);
}
Var Tape::div(Var a, Var b) {
    check(a);
    check(b);
    return push(Op::kDiv, a.id, b.id);
}
Var Tape::neg(Var a) {
    check(a);
    return push(Op::kNeg, a.id, -1);
}
Var Tape::exp(Var a) {
    check(a);
    return push(Op::kExp, a.id, -1);
}
Var Tape::log(Var a) {
    check(a);
    return push(Op::kLog, a.id, -1);
}
Var Tape::sin(Var a) {
    check(a);
    return push(Op::kSin, a.id, -1);
}
Var Tape::cos(Var a) {
    check(a);
    return push(Op::kCos, a.id, -1);
}
Var Tape::sqrt(Var a) {
    check(a);
    return push(Op::kSqrt, a.id, -1);
}
Var Tape::pow(Var a, double exponent) {
    check(a);
    Var out = push(Op::kPow, a.id, -1);
    nodes_[out.id].pb = exponent;
    compute(out.id);  // recompute now that the exponent is set
    return out;
}
Var Tape::sigmoid(Var a) {
    check(a);
    return push(Op::kSigmoid, a.id, -1);
}
Var Tape::silu(Var a) {
    check(a);
    return push(Op::kSilu, a.id, -1);
}
Var Tape::tanh(Var a) {
    check(a);
    return push(Op::kTanh, a.id, -1);
}
Var Tape::copy(Var a) {
    check(a);
    return push(Op::kCopy, a.id, -1);
}

Var Tape::lin_comb(std::span<const Var> args, std::span<const double> coeffs) {
    if (args.size() != coeffs.size())
        throw std::invalid_argument("Tape: lin_comb args/coeffs size mismatch");
    const auto offset = static_cast<std::int32_t>(lc_args_.size());
    for (std::size_t k = 0; k < args.size(); ++k) {
        check(args[k]);
        lc_args_.push_back(args[k].id);
        lc_coeffs_.push_back(coeffs[k]);
    }
    Var out = push(Op::kLinComb, offset, static_cast<std::int32_t>(args.size()));
    compute(out.id);
    return out;
}

Var Tape::lin_row(Var first, std::int32_t n, const double* coeffs) {
    check(first);
    if (n < 1 || first.id + n > static_cast<std::int32_t>(nodes_.size()))
        throw std::invalid_argument("Tape: lin_row block out of range");
    lin_rows_.push_back({coeffs, n});
    Var out = push(Op::kLinRow, first.id, static_cast<std::int32_t>(lin_rows_.size() - 1));
    compute(out.id);
    return out;
}

Var Tape::spline(const BSplineBasis& basis, Var coeff_first, Var x, int order) {
    check(coeff_first);
    check(x);
    if (order < 0 || order > 2) throw std::invalid_argument("Tape: spline order must be 0..2");
    if (coeff_first.id + basis.count() > static_cast<std::int32_t>(nodes_.size()))
        throw std::invalid_argument("Tape: spline coefficient block out of range");
    SplineSlot slot;
    slot.basis = &basis;
    slot.c_first = coeff_first.id;
    slot.order = order;
    spline_slots_.push_back(slot);
    Var out = push(Op::kSpline, x.id, static_cast<std::int32_t>(spline_slots_.size() - 1));
    compute(out.id);
    return out;
}

void Tape::compute(std::size_t i) {
    Node& n = nodes_[i];
    switch (n.op) {
        case Op::kConst:
        case Op::kInput:
            break;
        case Op::kParam:
            break;  // refreshed in forward(store)
        case Op::kAdd:
            n.value = nodes_[n.a].value + nodes_[n.b].value;
            break;
        case Op::kSub:
            n.value = nodes_[n.a].value - nodes_[n.b].value;
            break;
        case Op::kMul:
            n.value = nodes_[n.a].value * nodes_[n.b].value;
            break;
        case Op::kDiv:
            n.pa = 1.0 / nodes_[n.b].value;
            n.value = nodes_[n.a].value * n.pa;
            break;
        case Op::kNeg:
            n.value = -nodes_[n.a].value;
            break;
        case Op::kExp:
            n.value = std::exp(nodes_[n.a].value);
            break;
        case Op::kLog:
            n.value = std::log(nodes_[n.a].value);
            n.pa = 1.0 / nodes_[n.a].value;
            break;
        case Op::kSin:
            n.value = std::sin(nodes_[n.a].value);
            n.pa = std::cos(nodes_[n.a].value);
            break;
        case Op::kCos:
            n.value = std::cos(nodes_[n.a].value);
            n.pa = -std::sin(nodes_[n.a].value);
            break;
        case Op::kSqrt:
            n.value = std::sqrt(nodes_[n.a].value);
            n.pa = 0.5 / n.value;
            break;
        case Op::kPow: {
            const double x = nodes_[n.a].value;
            const double p = n.pb;
            n.value = std::pow(x, p);
            n.pa = (p == 0.0) ? 0.0 : p * std::pow(x, p - 1.0);
            break;
        }
        case Op::kSigmoid:
            n.value = stable_sigmoid(nodes_[n.a].value);
            break;
        case Op::kSilu: {
            const double x = nodes_[n.a].value;
            const double s = stable_sigmoid(x);
            n.value = x * s;
            n.pa = s * (1.0 + x * (1.0 - s));
            break;
        }
        case Op::kTanh:
            n.value = std::tanh(nodes_[n.a].value);
            break;
        case Op::kCopy:
            n.value = nodes_[n.a].value;
            break;
        case Op::kLinComb: {
            double acc = 0.0;
            const std::int32_t* ids = lc_args_.data() + n.a;
            const double* cs = lc_coeffs_.data() + n.a;
            for (std::int32_t k = 0; k < n.b; ++k) acc += cs[k] * nodes_[ids[k]].value;
            n.value = acc;
            break;
        }
        case Op::kLinRow: {
            const LinRow& row = lin_rows_[n.b];
            double acc = 0.0;
            for (std::int32_t k = 0; k < row.n; ++k) acc += row.coeffs[k] * nodes_[n.a + k].value;
            n.value = acc;
            break;
        }
        case Op::kSpline: {
            SplineSlot& s = spline_slots_[n.b];
            const int p = s.basis->degree();
            const auto w = s.basis->eval_window(nodes_[n.a].value, s.order + 1);
            s.active_first = w.first;
            double v = 0.0, dv = 0.0;
            for (int j = 0; j <= p; ++j) {
                const double c = nodes_[s.c_first + w.first + j].value;
                v += c * w.ders[s.order][j];
                dv += c * w.ders[s.order + 1][j];
                s.pc[j] = w.ders[s.order][j];
            }
            if (w.clamped) {
                // clamped spline: constant continuation for the value,
                // vanishing derivatives outside the grid
                dv = 0.0;
                if (s.order >= 1) {
                    v = 0.0;
                    for (int j = 0; j <= p; ++j) s.pc[j] = 0.0;
                }
            }
            n.value = v;
            n.pa = dv;
            break;
        }
    }
}

void Tape::forward(const ParameterStore& store) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.op == Op::kParam)
            n.value = store[static_cast<std::size_t>(n.a)];
        else
            compute(i);
    }
}

void Tape::forward() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) compute(i);
}

Var Tape::input_var(std::size_t ordinal) const {
    if (ordinal >= inputs_.size()) throw std::out_of_range("Tape: input ordinal out of range");
    return {const_cast<Tape*>(this), inputs_[ordinal]};
}

void Tape::set_input(std::size_t ordinal, double v) {
    if (ordinal >= inputs_.size()) throw std::out_of_range("Tape: input ordinal out of range");
    nodes_[inputs_[ordinal]].value = v;
}

double Tape::value(Var v) const {
    check(v);
    return nodes_[v.id].value;
}

void Tape::backward(Var output) {
    check(output);
    adjoints_.assign(nodes_.size(), 0.0);
    adjoints_[output.id] = 1.0;
    for (std::int32_t i = output.id; i >= 0; --i) {
        const double adj = adjoints_[i];
        if (adj == 0.0) continue;
        const Node& n = nodes_[i];
        switch (n.op) {
            case Op::kConst:
            case Op::kInput:
            case Op::kParam:
                break;
            case Op::kAdd:
                adjoints_[n.a] += adj;
                adjoints_[n.b] += adj;
                break;
            case Op::kSub:
                adjoints_[n.a] += adj;
                adjoints_[n.b] -= adj;
                break;
            case Op::kMul:
                adjoints_[n.a] += adj * nodes_[n.b].value;
                adjoints_[n.b] += adj * nodes_[n.a].value;
                break;
            case Op::kDiv:
                adjoints_[n.a] += adj * n.pa;
                adjoints_[n.b] -= adj * n.value * n.pa;
                break;
            case Op::kNeg:
                adjoints_[n.a] -= adj;
                break;
            case Op::kExp:
                adjoints_[n.a] += adj * n.value;
                break;
            case Op::kLog:
            case Op::kSin:
            case Op::kCos:
            case Op::kSqrt:
            case Op::kPow:
            case Op::kSilu:
                adjoints_[n.a] += adj * n.pa;
                break;
            case Op::kSigmoid:
                adjoints_[n.a] += adj * n.value * (1.0 - n.value);
                break;
            case Op::kTanh:
                adjoints_[n.a] += adj * (1.0 - n.value * n.value);
                break;
            case Op::kCopy:
                adjoints_[n.a] += adj;
                break;
            case Op::kLinComb: {
                const std::int32_t* ids = lc_args_.data() + n.a;
                const double* cs = lc_coeffs_.data() + n.a;
                for (std::int32_t k = 0; k < n.b; ++k) adjoints_[ids[k]] += adj * cs[k];
                break;
            }
            case Op::kLinRow: {
                const LinRow& row = lin_rows_[n.b];
                for (std::int32_t k = 0; k < row.n; ++k) adjoints_[n.a + k] += adj * row.coeffs[k];
                break;
            }
            case Op::kSpline: {
                const SplineSlot& s = spline_slots_[n.b];
                adjoints_[n.a] += adj * n.pa;
                const std::int32_t c0 = s.c_first + s.active_first;
                for (int j = 0; j <= s.basis->degree(); ++j) adjoints_[c0 + j] += adj * s.pc[j];
                break;
            }
        }
    }
}

double Tape::adjoint(Var v) const {
    check(v);
    if (adjoints_.size() != nodes_.size()) throw std::logic_error("Tape: backward() not run");
    return adjoints_[v.id];
}

void Tape::param_gradient(Var output, std::span<double> grad) {
    backward(output);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& [index, node] : param_cache_) {
        if (index >= grad.size()) throw std::out_of_range("Tape: gradient span too small");
        grad[index] = adjoints_[node];
    }
}

std::vector<double> Tape::input_gradient(Var output) {
    backward(output);
    std::vector<double> g(inputs_.size());
    for (std::size_t k = 0; k < inputs_.size(); ++k) g[k] = adjoints_[inputs_[k]];
    return g;
}

std::vector<std::int32_t> Tape::pushforward(std::span<const Var> seeds, std::int32_t limit,
                                            const std::vector<std::int32_t>* prior) {
    if (limit < 0 || limit > static_cast<std::int32_t>(nodes_.size()))
        throw std::invalid_argument("Tape: pushforward limit out of range");
    std::vector<std::int32_t> t(limit, -1);
    if (prior) {
        if (prior->size() > t.size()) throw std::invalid_argument("Tape: prior map larger than limit");
        std::copy(prior->begin(), prior->end(), t.begin());
    }
    const Var one = constant(1.0);
    for (Var s : seeds) {
        check(s);
        const Op op = nodes_[s.id].op;
        if (op != Op::kInput && op != Op::kParam)
            throw std::invalid_argument("Tape: pushforward seeds must be input or parameter leaves");
        if (s.id < limit) t[s.id] = one.id;
    }
    auto tv = [&](std::int32_t id) -> Var { return {this, t[id]}; };
    for (std::int32_t i = 0; i < limit; ++i) {
        if (t[i] != -1) continue;
        const Node n = nodes_[i];  // by value: nodes_ may grow below
        const Var self{this, i};
        const bool ha = n.a >= 0 && n.a < limit && n.op != Op::kConst && n.op != Op::kInput &&
                        n.op != Op::kParam && n.op != Op::kLinComb && n.op != Op::kLinRow &&
                        t[n.a] != -1;
        const bool hb = (n.op == Op::kAdd || n.op == Op::kSub || n.op == Op::kMul || n.op == Op::kDiv) &&
                        t[n.b] != -1;
        Var out{};
        switch (n.op) {
            case Op::kConst:
            case Op::kInput:
            case Op::kParam:
                continue;
            case Op::kAdd:
                if (ha && hb)
                    out = add(tv(n.a), tv(n.b));
                else if (ha)
                    out = tv(n.a);
                else if (hb)
                    out = tv(n.b);
                break;
            case Op::kSub:
                if (ha && hb)
                    out = sub(tv(n.a), tv(n.b));
                else if (ha)
                    out = tv(n.a);
                else if (hb)
                    out = neg(tv(n.b));
                break;
            case Op::kMul:
                if (ha && hb)
                    out = add(mul(tv(n.a), Var{this, n.b}), mul(Var{this, n.a}, tv(n.b)));
                else if (ha)
                    out = mul(tv(n.a), Var{this, n.b});
                else if (hb)
                    out = mul(Var{this, n.a}, tv(n.b));
                break;
            case Op::kDiv: {
                const Var vb{this, n.b};
                if (ha && hb)
                    out = div(sub(tv(n.a), mul(self, tv(n.b))), vb);
                else if (ha)
                    out = div(tv(n.a), vb);
                else if (hb)
                    out = neg(div(mul(self, tv(n.b)), vb));
                break;
            }
            case Op::kNeg:
                if (ha) out = neg(tv(n.a));
                break;
            case Op::kExp:
                if (ha) out = mul(self, tv(n.a));
                break;
            case Op::kLog:
                if (ha) out = div(tv(n.a), Var{this, n.a});
                break;
            case Op::kSin:
                if (ha) out = mul(cos(Var{this, n.a}), tv(n.a));
                break;
            case Op::kCos:
                if (ha) out = neg(mul(sin(Var{this, n.a}), tv(n.a)));
                break;
            case Op::kSqrt:
                if (ha) out = div(tv(n.a), mul(constant(2.0), self));
                break;
            case Op::kPow:
                if (ha) {
                    if (n.pb == 0.0)
                        out = Var{};
                    else if (n.pb == 1.0)
                        out = tv(n.a);
                    else
                        out = mul(constant(n.pb), mul(pow(Var{this, n.a}, n.pb - 1.0), tv(n.a)));
                }
                break;
            case Op::kSigmoid:
                if (ha) out = mul(mul(self, sub(constant(1.0), self)), tv(n.a));
                break;
            case Op::kSilu:
                if (ha) {
                    const Var x{this, n.a};
                    const Var s = sigmoid(x);
                    const Var d = mul(s, add(constant(1.0), mul(x, sub(constant(1.0), s))));
                    out = mul(d, tv(n.a));
                }
                break;
            case Op::kTanh:
                if (ha) out = mul(sub(constant(1.0), mul(self, self)), tv(n.a));
                break;
            case Op::kCopy:
                if (ha) out = tv(n.a);
                break;
            case Op::kLinComb: {
                std::vector<Var> args;
                std::vector<double> cs;
                for (std::int32_t k = 0; k < n.b; ++k) {
                    const std::int32_t arg = lc_args_[n.a + k];
                    if (arg < limit && t[arg] != -1) {
                        args.push_back(tv(arg));
                        cs.push_back(lc_coeffs_[n.a + k]);
                    }
                }
                if (!args.empty()) out = lin_comb(args, cs);
                break;
            }
            case Op::kLinRow: {
                const LinRow& row = lin_rows_[n.b];
                for (std::int32_t k = 0; k < row.n; ++k)
                    if (n.a + k < limit && t[n.a + k] != -1)
                        throw std::logic_error("Tape: pushforward through lin_row is unsupported");
                break;
            }
            case Op::kSpline: {
                const SplineSlot& s = spline_slots_[n.b];
                for (std::int32_t k = 0; k < s.basis->count(); ++k)
                    if (s.c_first + k < limit && t[s.c_first + k] != -1)
                        throw std::logic_error(
                            "Tape: pushforward through spline coefficients is unsupported");
                if (ha) {
                    if (s.order >= 2)
                        throw std::logic_error("Tape: input derivatives beyond order 2 unsupported");
                    out = mul(spline(*s.basis, Var{this, s.c_first}, Var{this, n.a}, s.order + 1),
                              tv(n.a));
                }
                break;
            }
        }
        if (out.valid()) t[i] = out.id;
    }
    return t;
}

Var Tape::tangent(const std::vector<std::int32_t>& map, Var v) {
    check(v);
    if (v.id >= static_cast<std::int32_t>(map.size()) || map[v.id] == -1)
        throw std::logic_error("Tape: requested tangent is identically zero or out of range");
    return {this, map[v.id]};
}

Var Tape::tangent_or_zero(const std::vector<std::int32_t>& map, Var v) {
    check(v);
    if (v.id >= static_cast<std::int32_t>(map.size()) || map[v.id] == -1) return constant(0.0);
    return {this, map[v.id]};
}

double second_derivative(Tape& tape, Var output, std::size_t i, std::size_t j) {
    const Var xi = tape.input_var(i);
    const Var xj = tape.input_var(j);
    const Var seeds_i[] = {xi};
    const Var seeds_j[] = {xj};
    auto m1 = tape.pushforward(seeds_i, static_cast<std::int32_t>(tape.size()));
    const Var d1 = tape.tangent_or_zero(m1, output);
    auto m2 = tape.pushforward(seeds_j, static_cast<std::int32_t>(tape.size()));
    const Var d2 = tape.tangent_or_zero(m2, d1);
    return tape.value(d2);
}

}  // namespace kanoc
