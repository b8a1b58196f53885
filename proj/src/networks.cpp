#include "kanoc/networks.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "kanoc/rng.hpp"

namespace kanoc {

Network::Network(std::vector<int> widths, std::size_t param_count)
    : widths_(std::move(widths)), param_count_(param_count) {
    if (widths_.size() < 2)
        throw std::invalid_argument("Network: need at least an input and an output layer");
    for (int w : widths_)
        if (w < 1) throw std::invalid_argument("Network: layer widths must be positive");
}

void Network::register_params(ParameterStore& store, std::string name) {
    if (registered_) throw std::logic_error("Network: parameters already registered");
    offset_ = store.register_slice(name, param_count_);
    slice_name_ = std::move(name);
    registered_ = true;
}

Var Network::build_scalar(Tape& tape, std::span<const Var> inputs,
                          const ParameterStore& store) const {
    auto out = build(tape, inputs, store);
    if (out.size() != 1) throw std::logic_error("Network: scalar output expected");
    return out[0];
}

double Network::eval_scalar(const ParameterStore& store, std::span<const double> inputs) const {
    auto out = eval(store, inputs);
    if (out.size() != 1) throw std::logic_error("Network: scalar output expected");
    return out[0];
}

// ---------------------------------------------------------------- KAN

KanNetwork::KanNetwork(std::vector<int> widths, int degree, int grid_intervals)
    : Network(widths, 0), basis_(degree, grid_intervals) {
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
        edge_count_ += static_cast<std::size_t>(widths_[l]) * widths_[l + 1];
    param_count_ = edge_count_ * edge_params();
}

void KanNetwork::init(ParameterStore& store, std::uint64_t seed) {
    if (!registered_) throw std::logic_error("KanNetwork: register_params first");
    seed_ = seed;
    Rng rng(seed);
    auto values = store.values(slice_name_);
    const std::size_t nb = basis_.count();
    for (std::size_t e = 0; e < edge_count_; ++e) {
        double* p = values.data() + e * edge_params();
        for (std::size_t i = 0; i < nb; ++i) p[i] = 0.1 * rng.normal();
        p[nb] = 1.0;      // w_b
        p[nb + 1] = 1.0;  // w_s
    }
}

std::vector<Var> KanNetwork::build(Tape& tape, std::span<const Var> inputs,
                                   const ParameterStore& store) const {
    if (!registered_) throw std::logic_error("KanNetwork: register_params first");
    if (inputs.size() != static_cast<std::size_t>(widths_.front()))
        throw std::invalid_argument("KanNetwork: input dimension mismatch");
    // materialize the parameter leaves in index order so each edge's
    // coefficient block is contiguous on the tape (deduplicated afterwards)
    for (std::size_t i = 0; i < param_count_; ++i) tape.param(store, offset_ + i);

    const std::size_t nb = basis_.count();
    std::vector<Var> layer(inputs.begin(), inputs.end());
    std::size_t edge = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        std::vector<Var> next(widths_[l + 1]);
        for (int q = 0; q < widths_[l + 1]; ++q) {
            Var acc{};
            for (int p = 0; p < widths_[l]; ++p, ++edge) {
                const std::size_t base = offset_ + edge * edge_params();
                const Var c0 = tape.param(store, base);
                const Var wb = tape.param(store, base + nb);
                const Var ws = tape.param(store, base + nb + 1);
                const Var x = layer[p];
                const Var act = wb * tape.silu(x) + ws * tape.spline(basis_, c0, x);
                acc = acc.valid() ? acc + act : act;
            }
            next[q] = acc;
        }
        layer = std::move(next);
    }
    return layer;
}

std::vector<double> KanNetwork::eval(const ParameterStore& store,
                                     std::span<const double> inputs) const {
    if (!registered_) throw std::logic_error("KanNetwork: register_params first");
    if (inputs.size() != static_cast<std::size_t>(widths_.front()))
        throw std::invalid_argument("KanNetwork: input dimension mismatch");
    const auto values = store.values(slice_name_);
    const std::size_t nb = basis_.count();
    std::vector<double> layer(inputs.begin(), inputs.end());
    std::size_t edge = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        std::vector<double> next(widths_[l + 1], 0.0);
        for (int q = 0; q < widths_[l + 1]; ++q) {
            for (int p = 0; p < widths_[l]; ++p, ++edge) {
                const double* ep = values.data() + edge * edge_params();
                const double x = layer[p];
                const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                          : std::exp(x) / (1.0 + std::exp(x));
                next[q] += ep[nb] * (x * s) +
                           ep[nb + 1] * basis_.spline({ep, nb}, x);
            }
        }
        layer = std::move(next);
    }
    return layer;
}

// ---------------------------------------------------------------- MLP

namespace {
std::size_t mlp_param_count(const std::vector<int>& widths) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        n += static_cast<std::size_t>(widths[l] + 1) * widths[l + 1];
    return n;
}
}  // namespace

MlpNetwork::MlpNetwork(std::vector<int> widths) : Network(widths, 0) {
    param_count_ = mlp_param_count(widths_);
}

void MlpNetwork::init(ParameterStore& store, std::uint64_t seed) {
    if (!registered_) throw std::logic_error("MlpNetwork: register_params first");
    seed_ = seed;
    Rng rng(seed);
    auto values = store.values(slice_name_);
    std::size_t at = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const int nin = widths_[l], nout = widths_[l + 1];
        const double limit = std::sqrt(6.0 / (nin + nout));  // Glorot uniform
        for (int i = 0; i < nout * nin; ++i) values[at++] = rng.uniform(-limit, limit);
        for (int i = 0; i < nout; ++i) values[at++] = 0.0;
    }
}

std::vector<Var> MlpNetwork::build(Tape& tape, std::span<const Var> inputs,
                                   const ParameterStore& store) const {
    if (!registered_) throw std::logic_error("MlpNetwork: register_params first");
    if (inputs.size() != static_cast<std::size_t>(widths_.front()))
        throw std::invalid_argument("MlpNetwork: input dimension mismatch");
    for (std::size_t i = 0; i < param_count_; ++i) tape.param(store, offset_ + i);

    std::vector<Var> layer(inputs.begin(), inputs.end());
    std::size_t at = offset_;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const int nin = widths_[l], nout = widths_[l + 1];
        std::vector<Var> next(nout);
        const std::size_t wbase = at;
        const std::size_t bbase = at + static_cast<std::size_t>(nout) * nin;
        for (int q = 0; q < nout; ++q) {
            Var acc = tape.param(store, bbase + q);
            for (int p = 0; p < nin; ++p)
                acc = acc + tape.param(store, wbase + static_cast<std::size_t>(q) * nin + p) * layer[p];
            next[q] = (l + 2 < widths_.size()) ? tape.tanh(acc) : acc;
        }
        layer = std::move(next);
        at = bbase + nout;
    }
    return layer;
}

std::vector<double> MlpNetwork::eval(const ParameterStore& store,
                                     std::span<const double> inputs) const {
    if (!registered_) throw std::logic_error("MlpNetwork: register_params first");
    if (inputs.size() != static_cast<std::size_t>(widths_.front()))
        throw std::invalid_argument("MlpNetwork: input dimension mismatch");
    const auto values = store.values(slice_name_);
    std::vector<double> layer(inputs.begin(), inputs.end());
    std::size_t at = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const int nin = widths_[l], nout = widths_[l + 1];
        std::vector<double> next(nout);
        const std::size_t wbase = at;
        const std::size_t bbase = at + static_cast<std::size_t>(nout) * nin;
        for (int q = 0; q < nout; ++q) {
            double acc = values[bbase + q];
            for (int p = 0; p < nin; ++p)
                acc += values[wbase + static_cast<std::size_t>(q) * nin + p] * layer[p];
            next[q] = (l + 2 < widths_.size()) ? std::tanh(acc) : acc;
        }
        layer = std::move(next);
        at = bbase + nout;
    }
    return layer;
}

// ---------------------------------------------------------------- factory + io

std::unique_ptr<Network> make_network(const std::string& kind, std::vector<int> widths, int degree,
                                      int grid_intervals) {
    if (kind == "kan") return std::make_unique<KanNetwork>(std::move(widths), degree, grid_intervals);
    if (kind == "mlp") return std::make_unique<MlpNetwork>(std::move(widths));
    throw std::invalid_argument("make_network: unknown kind '" + kind + "'");
}

void save_network(const Network& net, const ParameterStore& store, const std::string& path) {
    nlohmann::json j;
    j["kind"] = net.kind();
    j["widths"] = net.widths();
    if (const auto* kan = dynamic_cast<const KanNetwork*>(&net)) {
        j["k"] = kan->degree();
        j["grid"] = kan->grid_intervals();
    }
    j["seed"] = net.seed();
    const auto values = store.values(net.slice_name());
    j["values"] = std::vector<double>(values.begin(), values.end());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_network: cannot open " + path);
    out << j.dump(2) << '\n';
}

std::pair<std::unique_ptr<Network>, std::vector<double>> load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_network: cannot open " + path);
    nlohmann::json j;
    in >> j;
    const std::string kind = j.at("kind").get<std::string>();
    auto widths = j.at("widths").get<std::vector<int>>();
    auto net = make_network(kind, std::move(widths), j.value("k", 3), j.value("grid", 5));
    auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != net->param_count())
        throw std::runtime_error("load_network: value count does not match the architecture");
    return {std::move(net), std::move(values)};
}

}  // namespace kanoc
