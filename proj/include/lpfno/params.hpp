#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "lpfno/grid.hpp"

namespace lpfno {

/// Named parameter tensors packed into one flat real vector. Complex tensors
/// occupy two reals per entry (re, im interleaved).
class ParamSet {
public:
    struct Block {
        std::string name;
        std::vector<std::size_t> shape;
        bool complex = false;
        std::size_t offset = 0;
        std::size_t size = 0;  // reals
    };

    std::size_t add(std::string name, std::vector<std::size_t> shape, bool complex = false);

    std::size_t find(const std::string& name) const;
    const Block& block(std::size_t b) const { return blocks_[b]; }
    const std::vector<Block>& blocks() const { return blocks_; }

    std::span<Real> values(std::size_t b) {
        return std::span<Real>(values_).subspan(blocks_[b].offset, blocks_[b].size);
    }
    std::span<const Real> values(std::size_t b) const {
        return std::span<const Real>(values_).subspan(blocks_[b].offset, blocks_[b].size);
    }
    std::span<std::complex<Real>> complex_values(std::size_t b);
    std::span<const std::complex<Real>> complex_values(std::size_t b) const;

    std::vector<Real>& flat() { return values_; }
    const std::vector<Real>& flat() const { return values_; }
    std::size_t size() const { return values_.size(); }

    /// Counts complex entries twice (real degrees of freedom).
    std::size_t parameter_count() const { return values_.size(); }

    friend bool operator==(const ParamSet& a, const ParamSet& b) {
        return a.values_ == b.values_ && a.layout_equal(b);
    }
    bool layout_equal(const ParamSet& o) const;

private:
    std::vector<Block> blocks_;
    std::vector<Real> values_;
};

/// Gradient buffer laid out like a ParamSet.
struct ParamGrads {
    std::vector<Real> flat;

    explicit ParamGrads(const ParamSet& p) : flat(p.size(), Real{0}) {}
    std::span<Real> of(const ParamSet& p, std::size_t b) {
        return std::span<Real>(flat).subspan(p.block(b).offset, p.block(b).size);
    }
    std::span<std::complex<Real>> complex_of(const ParamSet& p, std::size_t b) {
        auto s = of(p, b);
        return {reinterpret_cast<std::complex<Real>*>(s.data()), s.size() / 2};
    }
    void zero() { std::fill(flat.begin(), flat.end(), Real{0}); }
};

}  // namespace lpfno
