#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kanoc/problem.hpp"

namespace kanoc {

namespace {

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

int parse_state_name(const std::string& name, int states) {
    if (name == "x" && states == 1) return 0;
    if (name.size() >= 2 && name[0] == 'x') {
        const int i = std::atoi(name.c_str() + 1);
        if (i >= 1 && i <= states) return i - 1;
    }
    throw std::invalid_argument("problem config: unknown state '" + name + "'");
}

}  // namespace

ControlProblem parse_problem_config(const std::string& text, const std::string& origin) {
    ControlProblem p;
    p.name = "config";
    p.lo.clear();
    p.hi.clear();
    p.exact_states.clear();
    int domain_dims_seen = 0;
    bool dim_set = false;

    // expressions are parsed in a second pass, once dim/states/scalars are known
    struct PendingResidual {
        std::string lhs_kind;  // "dt", "caputo", or "expr"
        double alpha = 0.0;
        int state = 0;
        std::string lhs_text, rhs_text;
    };
    std::vector<PendingResidual> residuals;
    struct PendingCondition {
        std::string state, coord;
        double value = 0.0;
        std::string target;
    };
    std::vector<PendingCondition> conditions;
    std::string cost_text, terminal_text;
    std::vector<std::pair<std::string, std::string>> exact_texts;
    std::vector<Observation> observations;

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    auto fail = [&](const std::string& what) -> void {
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++lineno;
        const std::size_t hash = raw.find('#');
        std::string line = strip(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        std::string rest;
        std::getline(ls, rest);
        rest = strip(rest);

        if (key == "name") {
            p.name = rest;
        } else if (key == "dim") {
            p.dim = std::stoi(rest);
            dim_set = true;
        } else if (key == "states") {
            p.states = std::stoi(rest);
        } else if (key == "domain") {
            auto w = split_words(rest);
            if (w.size() != 2) fail("domain expects: lo hi");
            p.lo.push_back(std::stod(w[0]));
            p.hi.push_back(std::stod(w[1]));
            ++domain_dims_seen;
        } else if (key == "scalar") {
            auto w = split_words(rest);
            if (w.size() < 2) fail("scalar expects: name initial [reference]");
            TrainableScalar s{w[0], std::stod(w[1]), std::nullopt};
            if (w.size() > 2) s.reference = std::stod(w[2]);
            p.scalars.push_back(std::move(s));
        } else if (key == "weight") {
            auto w = split_words(rest);
            if (w.size() != 2) fail("weight expects: {J|R|B|O} value");
            const double v = std::stod(w[1]);
            if (w[0] == "J")
                p.weights.cost = v;
            else if (w[0] == "R")
                p.weights.residual = v;
            else if (w[0] == "B")
                p.weights.boundary = v;
            else if (w[0] == "O")
                p.weights.observation = v;
            else
                fail("unknown weight '" + w[0] + "'");
        } else if (key == "grid") {
            auto w = split_words(rest);
            if (w.size() != 2) fail("grid expects: {quad|frac|volterra|eval} value");
            const int v = std::stoi(w[1]);
            if (w[0] == "quad")
                p.grids.quad_order = v;
            else if (w[0] == "frac")
                p.grids.frac_grid = v;
            else if (w[0] == "volterra")
                p.grids.volterra_order = v;
            else if (w[0] == "eval")
                p.grids.eval_per_dim = v;
            else
                fail("unknown grid '" + w[0] + "'");
        } else if (key == "cost") {
            cost_text = rest;
        } else if (key == "terminal") {
            terminal_text = rest;
        } else if (key == "residual") {
            const std::size_t eq = rest.find('=');
            if (eq == std::string::npos) fail("residual expects lhs = rhs");
            std::string lhs = strip(rest.substr(0, eq));
            PendingResidual r;
            r.rhs_text = strip(rest.substr(eq + 1));
            auto w = split_words(lhs);
            if (!w.empty() && w[0] == "dt" && w.size() == 2) {
                r.lhs_kind = "dt";
                r.lhs_text = w[1];
            } else if (!w.empty() && w[0] == "caputo" && w.size() == 3) {
                r.lhs_kind = "caputo";
                r.alpha = std::stod(w[1]);
                r.lhs_text = w[2];
            } else {
                r.lhs_kind = "expr";
                r.lhs_text = lhs;
            }
            residuals.push_back(std::move(r));
        } else if (key == "condition") {
            // condition <state> <coord>=<value> <target expr>
            std::istringstream cs(rest);
            PendingCondition c;
            std::string face;
            cs >> c.state >> face;
            std::getline(cs, c.target);
            c.target = strip(c.target);
            const std::size_t eq = face.find('=');
            if (eq == std::string::npos) fail("condition expects coord=value");
            c.coord = face.substr(0, eq);
            c.value = std::stod(face.substr(eq + 1));
            if (c.target.empty()) fail("condition expects a target expression");
            conditions.push_back(std::move(c));
        } else if (key == "observe") {
            // observe <state> <coord...> : <value>
            const std::size_t colon = rest.find(':');
            if (colon == std::string::npos) fail("observe expects: state coords : value");
            auto w = split_words(rest.substr(0, colon));
            if (w.empty()) fail("observe expects a state");
            Observation o;
            o.state = -1;  // resolved after states is known
            observations.push_back(o);
            auto& obs = observations.back();
            obs.value = std::stod(strip(rest.substr(colon + 1)));
            exact_texts.emplace_back("__obs_state__" + std::to_string(observations.size() - 1), w[0]);
            for (std::size_t i = 1; i < w.size(); ++i) obs.point.push_back(std::stod(w[i]));
        } else if (key == "exact") {
            auto sp = rest.find(' ');
            if (sp == std::string::npos) fail("exact expects: {u|xN} expression");
            exact_texts.emplace_back(strip(rest.substr(0, sp)), strip(rest.substr(sp)));
        } else {
            fail("unknown directive '" + key + "'");
        }
    }

    if (!dim_set) p.dim = domain_dims_seen > 0 ? domain_dims_seen : 1;
    if (domain_dims_seen == 0) fail("missing domain");
    if (domain_dims_seen == 1 && p.dim > 1) {
        // one domain line shared by every dimension
        p.lo.assign(p.dim, p.lo[0]);
        p.hi.assign(p.dim, p.hi[0]);
    } else if (domain_dims_seen != p.dim) {
        fail("domain lines do not match dim");
    }

    ExprSymbols sym;
    sym.dim = p.dim;
    sym.states = p.states;
    for (const auto& s : p.scalars) sym.scalars.insert(s.name);

    if (cost_text.empty()) fail("missing cost");
    {
        ExprSymbols cost_sym = sym;
        cost_sym.allow_partials = false;
        cost_sym.allow_volterra = false;
        p.cost = parse_expr(cost_text, cost_sym);
        if (!terminal_text.empty() && terminal_text != "0")
            p.terminal = parse_expr(terminal_text, cost_sym);
    }

    for (const auto& r : residuals) {
        ResidualSpec spec;
        if (r.lhs_kind == "caputo") {
            spec.caputo = CaputoLhs{r.alpha, parse_state_name(r.lhs_text, p.states)};
        } else if (r.lhs_kind == "dt") {
            spec.lhs = Expr::partial(parse_state_name(r.lhs_text, p.states), p.dim - 1, 1);
        } else {
            spec.lhs = parse_expr(r.lhs_text, sym);
        }
        spec.rhs = parse_expr(r.rhs_text, sym);
        p.residuals.push_back(std::move(spec));
    }

    ExprSymbols coord_sym = sym;
    coord_sym.allow_partials = false;
    coord_sym.allow_volterra = false;
    for (const auto& c : conditions) {
        FaceCondition fc;
        fc.state = parse_state_name(c.state, p.states);
        // reuse the parser's coordinate naming
        const Expr coord = parse_expr(c.coord, coord_sym);
        fc.fixed_dim = coord.node().a;
        fc.fixed_value = c.value;
        fc.target = parse_expr(c.target, coord_sym);
        p.conditions.push_back(std::move(fc));
    }

    p.exact_states.assign(p.states, Expr{});
    for (const auto& [who, what] : exact_texts) {
        if (who.rfind("__obs_state__", 0) == 0) {
            const std::size_t idx = std::stoul(who.substr(13));
            observations[idx].state = parse_state_name(what, p.states);
            continue;
        }
        if (who == "u")
            p.exact_control = parse_expr(what, coord_sym);
        else
            p.exact_states[parse_state_name(who, p.states)] = parse_expr(what, coord_sym);
    }
    p.observations = std::move(observations);

    p.validate();
    return p;
}

ControlProblem load_problem_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_problem_config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_problem_config(buf.str(), path);
}

}  // namespace kanoc
