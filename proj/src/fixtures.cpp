#include "rhflow/fixtures.hpp"

#include <cmath>

#include "rhflow/map_calculus.hpp"
#include "rhflow/util.hpp"

namespace rhflow {
namespace fixtures {

namespace {

// deterministic uniform in [-1, 1)
double unit(uint64_t seed, uint64_t k) {
    return 2.0 * (static_cast<double>(mix_seed(seed, k) >> 11) * 0x1.0p-53) - 1.0;
}

// sum of modes cos/sin(kx  x + ky y + phase) with |k| <= 2
double fourier(const GridGeometry& grid, uint64_t seed, double x, double y) {
    double acc = 0.0;
    int idx = 0;
    const double base = two_pi / grid.period; // fundamental wavenumber
    for (int kx = 0; kx <= 2; ++kx)
        for (int ky = (grid.dim == 2 ? -2 : 0); ky <= (grid.dim == 2 ? 2 : 0); ++ky) {
            if (kx == 0 && ky <= 0) continue;
            const double amp = unit(seed, idx * 2) / (1.0 + kx * kx + ky * ky);
            const double phase = M_PI * unit(seed, idx * 2 + 1);
            acc += amp * std::cos(base * (kx * x + ky * y) + phase);
            ++idx;
        }
    return acc;
}

} // namespace

ScalarField smooth_scalar(const GridGeometry& grid, double amplitude, uint64_t seed) {
    ScalarField f(grid);
    for (int node = 0; node < grid.node_count(); ++node) {
        int i, j;
        grid.unpack(node, i, j);
        f[node] = amplitude * fourier(grid, seed, grid.coord(i), grid.coord(j));
    }
    return f;
}

MetricField conformal_metric(const GridGeometry& grid, double amplitude, uint64_t seed) {
    ScalarField u = smooth_scalar(grid, amplitude, seed);
    MetricField g(grid);
    for (int node = 0; node < grid.node_count(); ++node) {
        const double s = std::exp(2.0 * u[node]);
        for (int a = 0; a < grid.dim; ++a) g(node, a, a) = s;
    }
    return g;
}

MetricField bumpy_metric(const GridGeometry& grid, double amplitude, uint64_t seed) {
    MetricField g = MetricField::flat(grid);
    const int m = grid.dim;
    int comp = 0;
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            ScalarField b = smooth_scalar(grid, amplitude, mix_seed(seed, 100 + comp));
            for (int node = 0; node < grid.node_count(); ++node) {
                g(node, i, j) += b[node];
                if (i != j) g(node, j, i) += b[node];
            }
            ++comp;
        }
    return g;
}

SymTensorField smooth_sym_tensor(const GridGeometry& grid, double amplitude, uint64_t seed) {
    SymTensorField t(grid);
    const int m = grid.dim;
    int comp = 0;
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            ScalarField b = smooth_scalar(grid, amplitude, mix_seed(seed, 200 + comp));
            for (int node = 0; node < grid.node_count(); ++node) {
                t(node, i, j) = b[node];
                t(node, j, i) = b[node];
            }
            ++comp;
        }
    return t;
}

MapField equator_map(const GridGeometry& grid, double rho) {
    MapField phi(grid, 3);
    for (int node = 0; node < grid.node_count(); ++node) {
        int i, j;
        grid.unpack(node, i, j);
        const double x = grid.coord(i) * two_pi / grid.period;
        phi(node, 0) = rho * std::cos(x);
        phi(node, 1) = rho * std::sin(x);
        phi(node, 2) = 0.0;
    }
    return phi;
}

MapField perturbed_equator_map(const GridGeometry& grid, double amplitude, uint64_t seed,
                               double rho) {
    MapField phi = equator_map(grid, rho);
    ScalarField b = smooth_scalar(grid, amplitude, seed);
    for (int node = 0; node < grid.node_count(); ++node) phi(node, 2) += rho * b[node];
    TargetSpec sphere = TargetSpec::sphere(2, rho);
    project_to_target(phi, sphere);
    return phi;
}

MapField smooth_scalar_map(const GridGeometry& grid, double amplitude, uint64_t seed) {
    MapField phi(grid, 1);
    ScalarField b = smooth_scalar(grid, amplitude, seed);
    phi.data = b.data;
    return phi;
}

MapField constant_sphere_map(const GridGeometry& grid, double rho) {
    MapField phi(grid, 3);
    for (int node = 0; node < grid.node_count(); ++node) phi(node, 0) = rho;
    return phi;
}

MapField tangent_perturbation(const MapField& phi, double amplitude, uint64_t seed,
                              double rho) {
    MapField theta(phi.grid, phi.embedding_dim);
    for (int c = 0; c < phi.embedding_dim; ++c) {
        ScalarField b = smooth_scalar(phi.grid, amplitude, mix_seed(seed, 300 + c));
        for (int node = 0; node < phi.grid.node_count(); ++node) theta(node, c) = b[node];
    }
    for (int node = 0; node < phi.grid.node_count(); ++node) {
        double dot = 0.0;
        for (int c = 0; c < phi.embedding_dim; ++c) dot += theta(node, c) * phi(node, c);
        for (int c = 0; c < phi.embedding_dim; ++c)
            theta(node, c) -= dot / (rho * rho) * phi(node, c);
    }
    return theta;
}

VectorField smooth_vector(const GridGeometry& grid, double amplitude, uint64_t seed) {
    VectorField v(grid);
    for (int a = 0; a < grid.dim; ++a) {
        ScalarField b = smooth_scalar(grid, amplitude, mix_seed(seed, 400 + a));
        for (int node = 0; node < grid.node_count(); ++node) v(node, a) = b[node];
    }
    return v;
}

} // namespace fixtures
} // namespace rhflow
