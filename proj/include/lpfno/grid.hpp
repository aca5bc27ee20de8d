#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "lpfno/error.hpp"

namespace lpfno {

using Real = double;

/// Cell counts of a 3D array; x slowest, z fastest.
struct Shape3 {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t nz = 0;

    std::size_t size() const { return nx * ny * nz; }
    std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return (ix * ny + iy) * nz + iz;
    }
    std::array<std::size_t, 3> coords(std::size_t idx) const {
        return {idx / (ny * nz), (idx / nz) % ny, idx % nz};
    }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Uniform isotropic Cartesian grid. Sample (ix, iy, iz) sits at
/// origin + (ix, iy, iz) * dx; the top surface is the iz = nz - 1 plane.
struct Grid3 {
    Shape3 shape;
    Real dx = 0;
    std::array<Real, 3> origin{0, 0, 0};

    std::size_t nx() const { return shape.nx; }
    std::size_t ny() const { return shape.ny; }
    std::size_t nz() const { return shape.nz; }
    std::size_t size() const { return shape.size(); }
    std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return shape.index(ix, iy, iz);
    }
    std::array<std::size_t, 3> coords(std::size_t idx) const { return shape.coords(idx); }
    std::array<Real, 3> position(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return {origin[0] + static_cast<Real>(ix) * dx, origin[1] + static_cast<Real>(iy) * dx,
                origin[2] + static_cast<Real>(iz) * dx};
    }
    std::array<Real, 3> extents() const {
        return {static_cast<Real>(shape.nx) * dx, static_cast<Real>(shape.ny) * dx,
                static_cast<Real>(shape.nz) * dx};
    }
    friend bool operator==(const Grid3&, const Grid3&) = default;
};

Grid3 make_grid(long nx, long ny, long nz, Real dx, std::array<Real, 3> origin = {0, 0, 0});

/// Scalar samples on a Grid3. Immutable after construction; every value is finite.
class ScalarField3 {
public:
    ScalarField3() = default;
    ScalarField3(Grid3 grid, std::vector<Real> values);
    static ScalarField3 constant(const Grid3& grid, Real value);

    const Grid3& grid() const { return grid_; }
    std::span<const Real> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    Real operator[](std::size_t idx) const { return values_[idx]; }
    Real operator()(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return values_[grid_.index(ix, iy, iz)];
    }
    Real min() const;
    Real max() const;
    Real mean() const;

    friend bool operator==(const ScalarField3&, const ScalarField3&) = default;

private:
    Grid3 grid_;
    std::vector<Real> values_;
};

/// Temperature (K), metal volume fraction and liquid fraction on one grid.
struct FieldBundle {
    ScalarField3 T;
    ScalarField3 alpha;
    ScalarField3 fl;

    const Grid3& grid() const { return T.grid(); }
    friend bool operator==(const FieldBundle&, const FieldBundle&) = default;
};

/// Checks shared grid, T >= 0 and both fractions inside [0, 1].
FieldBundle make_bundle(ScalarField3 T, ScalarField3 alpha, ScalarField3 fl);

/// Takes every factor-th node starting at index 0 along each axis.
ScalarField3 subsample(const ScalarField3& field, long factor);
FieldBundle subsample(const FieldBundle& bundle, long factor);
Grid3 subsample(const Grid3& grid, long factor);

}  // namespace lpfno
