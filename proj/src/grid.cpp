#include "lpfno/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace lpfno {

Grid3 make_grid(long nx, long ny, long nz, Real dx, std::array<Real, 3> origin) {
    require(nx >= 2 && ny >= 2 && nz >= 2, Errc::invalid_argument,
            "grid counts must be >= 2, got " + std::to_string(nx) + "x" + std::to_string(ny) +
                "x" + std::to_string(nz));
    require(dx > 0 && std::isfinite(dx), Errc::invalid_argument, "grid spacing must be positive");
    Grid3 g;
    g.shape = {static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
               static_cast<std::size_t>(nz)};
    g.dx = dx;
    g.origin = origin;
    return g;
}

ScalarField3::ScalarField3(Grid3 grid, std::vector<Real> values)
    : grid_(grid), values_(std::move(values)) {
    require(values_.size() == grid_.size(), Errc::length_mismatch,
            "field has " + std::to_string(values_.size()) + " values, grid needs " +
                std::to_string(grid_.size()));
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            fail(Errc::non_finite, "non-finite field value at index " + std::to_string(i));
    }
}

ScalarField3 ScalarField3::constant(const Grid3& grid, Real value) {
    return ScalarField3(grid, std::vector<Real>(grid.size(), value));
}

Real ScalarField3::min() const { return *std::min_element(values_.begin(), values_.end()); }
Real ScalarField3::max() const { return *std::max_element(values_.begin(), values_.end()); }
Real ScalarField3::mean() const {
    return std::accumulate(values_.begin(), values_.end(), Real{0}) /
           static_cast<Real>(values_.size());
}

FieldBundle make_bundle(ScalarField3 T, ScalarField3 alpha, ScalarField3 fl) {
    require(T.grid() == alpha.grid() && T.grid() == fl.grid(), Errc::shape_mismatch,
            "bundle fields must share one grid");
    require(T.min() >= 0, Errc::invalid_argument, "temperature below 0 K");
    require(alpha.min() >= 0 && alpha.max() <= 1, Errc::invalid_argument,
            "alpha outside [0,1]");
    require(fl.min() >= 0 && fl.max() <= 1, Errc::invalid_argument,
            "liquid fraction outside [0,1]");
    return FieldBundle{std::move(T), std::move(alpha), std::move(fl)};
}

Grid3 subsample(const Grid3& grid, long factor) {
    require(factor >= 1, Errc::invalid_argument, "subsample factor must be >= 1");
    const auto f = static_cast<std::size_t>(factor);
    return make_grid(static_cast<long>(grid.nx() / f), static_cast<long>(grid.ny() / f),
                     static_cast<long>(grid.nz() / f), grid.dx * static_cast<Real>(factor),
                     grid.origin);
}

ScalarField3 subsample(const ScalarField3& field, long factor) {
    const Grid3 out = subsample(field.grid(), factor);
    const auto f = static_cast<std::size_t>(factor);
    std::vector<Real> values(out.size());
    for (std::size_t i = 0; i < out.nx(); ++i)
        for (std::size_t j = 0; j < out.ny(); ++j)
            for (std::size_t k = 0; k < out.nz(); ++k)
                values[out.index(i, j, k)] = field(f * i, f * j, f * k);
    return ScalarField3(out, std::move(values));
}

FieldBundle subsample(const FieldBundle& bundle, long factor) {
    return FieldBundle{subsample(bundle.T, factor), subsample(bundle.alpha, factor),
                       subsample(bundle.fl, factor)};
}

}  // namespace lpfno
