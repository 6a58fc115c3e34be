#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhflow/grid.hpp"

namespace rhflow {

// Raised when a field violates one of its invariants (non-SPD metric node,
// off-target map node, ...). Carries the worst offending node.
struct FieldError : std::runtime_error {
    int node = -1;
    double value = 0.0;
    FieldError(const std::string& what, int node_, double value_)
        : std::runtime_error(what), node(node_), value(value_) {}
};

namespace detail {

struct DenseField {
    GridGeometry grid;
    int comps = 1;
    std::vector<double> data;

    DenseField() = default;
    DenseField(const GridGeometry& g, int c, double fill = 0.0)
        : grid(g), comps(c), data(static_cast<size_t>(g.node_count()) * c, fill) {}

    double& at(int node, int c = 0) { return data[static_cast<size_t>(node) * comps + c]; }
    double at(int node, int c = 0) const { return data[static_cast<size_t>(node) * comps + c]; }
};

} // namespace detail

struct ScalarField : detail::DenseField {
    ScalarField() = default;
    explicit ScalarField(const GridGeometry& g, double fill = 0.0) : DenseField(g, 1, fill) {}
    double& operator[](int node) { return data[node]; }
    double operator[](int node) const { return data[node]; }
};

struct VectorField : detail::DenseField {
    VectorField() = default;
    explicit VectorField(const GridGeometry& g, double fill = 0.0)
        : DenseField(g, g.dim, fill) {}
    double& operator()(int node, int a) { return at(node, a); }
    double operator()(int node, int a) const { return at(node, a); }
};

// Symmetric m x m tensor per node, stored as a full matrix for uniform
// indexing; symmetry is maintained by construction.
struct SymTensorField : detail::DenseField {
    SymTensorField() = default;
    explicit SymTensorField(const GridGeometry& g, double fill = 0.0)
        : DenseField(g, g.dim * g.dim, fill) {}
    double& operator()(int node, int i, int j) { return at(node, i * grid.dim + j); }
    double operator()(int node, int i, int j) const { return at(node, i * grid.dim + j); }
};

// Fully lowered Riemann tensor R_ijkl, m^4 components per node.
struct FullCurvatureField : detail::DenseField {
    FullCurvatureField() = default;
    explicit FullCurvatureField(const GridGeometry& g)
        : DenseField(g, g.dim * g.dim * g.dim * g.dim) {}
    double& operator()(int node, int i, int j, int k, int l) {
        const int m = grid.dim;
        return at(node, ((i * m + j) * m + k) * m + l);
    }
    double operator()(int node, int i, int j, int k, int l) const {
        const int m = grid.dim;
        return at(node, ((i * m + j) * m + k) * m + l);
    }
};

// Christoffel symbols Gamma^k_ij, symmetric in (i,j).
struct ChristoffelField : detail::DenseField {
    ChristoffelField() = default;
    explicit ChristoffelField(const GridGeometry& g)
        : DenseField(g, g.dim * g.dim * g.dim) {}
    double& operator()(int node, int k, int i, int j) {
        const int m = grid.dim;
        return at(node, (k * m + i) * m + j);
    }
    double operator()(int node, int k, int i, int j) const {
        const int m = grid.dim;
        return at(node, (k * m + i) * m + j);
    }
};

// Riemannian metric g_ij: symmetric positive-definite at every node.
struct MetricField : SymTensorField {
    MetricField() = default;
    explicit MetricField(const GridGeometry& g) : SymTensorField(g) {}

    static MetricField flat(const GridGeometry& g) {
        MetricField m(g);
        for (int node = 0; node < g.node_count(); ++node)
            for (int a = 0; a < g.dim; ++a) m(node, a, a) = 1.0;
        return m;
    }
};

// Map values phi in R^d per node; sphere targets keep |phi| = rho.
struct MapField {
    GridGeometry grid;
    int embedding_dim = 1;
    std::vector<double> data;

    MapField() = default;
    MapField(const GridGeometry& g, int d, double fill = 0.0)
        : grid(g), embedding_dim(d),
          data(static_cast<size_t>(g.node_count()) * d, fill) {}

    double& operator()(int node, int c) {
        return data[static_cast<size_t>(node) * embedding_dim + c];
    }
    double operator()(int node, int c) const {
        return data[static_cast<size_t>(node) * embedding_dim + c];
    }
};

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double sup_abs(const detail::DenseField& f) { return max_abs(f.data); }

} // namespace rhflow
