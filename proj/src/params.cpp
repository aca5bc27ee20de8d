#include "lpfno/params.hpp"

#include <functional>
#include <numeric>

namespace lpfno {

std::size_t ParamSet::add(std::string name, std::vector<std::size_t> shape, bool complex) {
    for (const auto& b : blocks_)
        require(b.name != name, Errc::invalid_argument, "duplicate parameter block " + name);
    Block b;
    b.name = std::move(name);
    b.complex = complex;
    b.size = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()) *
             (complex ? 2 : 1);
    b.shape = std::move(shape);
    b.offset = values_.size();
    values_.resize(values_.size() + b.size, Real{0});
    blocks_.push_back(std::move(b));
    return blocks_.size() - 1;
}

std::size_t ParamSet::find(const std::string& name) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
        if (blocks_[i].name == name) return i;
    fail(Errc::invalid_argument, "no parameter block named " + name);
}

std::span<std::complex<Real>> ParamSet::complex_values(std::size_t b) {
    auto s = values(b);
    return {reinterpret_cast<std::complex<Real>*>(s.data()), s.size() / 2};
}

std::span<const std::complex<Real>> ParamSet::complex_values(std::size_t b) const {
    auto s = values(b);
    return {reinterpret_cast<const std::complex<Real>*>(s.data()), s.size() / 2};
}

bool ParamSet::layout_equal(const ParamSet& o) const {
    if (blocks_.size() != o.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto &a = blocks_[i], &b = o.blocks_[i];
        if (a.name != b.name || a.shape != b.shape || a.complex != b.complex) return false;
    }
    return true;
}

}  // namespace lpfno
