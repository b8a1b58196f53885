#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kanoc {

/// Flat ordered vector of trainable reals. Every value belongs to exactly one
/// named slice (a network's parameters, or a standalone scalar such as an
/// unknown model coefficient). The optimizer sees only the flat view.
class ParameterStore {
public:
    struct Slice {
        std::string name;
        std::size_t offset = 0;
        std::size_t size = 0;
    };

    /// Appends a slice and returns its offset into the flat vector.
    std::size_t register_slice(std::string name, std::size_t n) {
        if (n == 0) throw std::invalid_argument("ParameterStore: empty slice '" + name + "'");
        for (const auto& s : slices_)
            if (s.name == name)
                throw std::invalid_argument("ParameterStore: duplicate slice '" + name + "'");
        const std::size_t offset = values_.size();
        slices_.push_back({std::move(name), offset, n});
        values_.resize(offset + n, 0.0);
        return offset;
    }

    bool has(std::string_view name) const {
        for (const auto& s : slices_)
            if (s.name == name) return true;
        return false;
    }

    const Slice& slice(std::string_view name) const {
        for (const auto& s : slices_)
            if (s.name == name) return s;
        throw std::out_of_range("ParameterStore: no slice named '" + std::string(name) + "'");
    }

    std::span<double> values(std::string_view name) {
        const Slice& s = slice(name);
        return {values_.data() + s.offset, s.size};
    }
    std::span<const double> values(std::string_view name) const {
        const Slice& s = slice(name);
        return {values_.data() + s.offset, s.size};
    }

    const std::vector<Slice>& slices() const { return slices_; }
    std::size_t size() const { return values_.size(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    const double* data() const { return values_.data(); }

    /// Flat copy of all values (flatten); assign() is the inverse.
    std::vector<double> flatten() const { return values_; }

    void assign(std::span<const double> x) {
        if (x.size() != values_.size())
            throw std::invalid_argument("ParameterStore: assign size mismatch");
        std::copy(x.begin(), x.end(), values_.begin());
    }

private:
    std::vector<double> values_;
    std::vector<Slice> slices_;
};

}  // namespace kanoc
