#pragma once

#include <cstdint>

#include "rhflow/flow.hpp"

namespace rhflow {
namespace fixtures {

// Smooth periodic scalar built from a fixed low-wavenumber Fourier combination;
// deterministic in the seed. Amplitude scales the whole field.
ScalarField smooth_scalar(const GridGeometry& grid, double amplitude, uint64_t seed);

// Conformal metric e^{2u} delta with u = smooth_scalar(amplitude, seed).
MetricField conformal_metric(const GridGeometry& grid, double amplitude, uint64_t seed);

// SPD perturbation of the flat metric: delta + sum of smooth symmetric bumps.
MetricField bumpy_metric(const GridGeometry& grid, double amplitude, uint64_t seed);

// Smooth symmetric 2-tensor perturbation direction (not necessarily SPD).
SymTensorField smooth_sym_tensor(const GridGeometry& grid, double amplitude, uint64_t seed);

// Equator map into S^2: phi(x, y) = rho (cos x, sin x, 0).
MapField equator_map(const GridGeometry& grid, double rho = 1.0);

// Equator map with a smooth transverse perturbation, reprojected to the sphere.
MapField perturbed_equator_map(const GridGeometry& grid, double amplitude, uint64_t seed,
                               double rho = 1.0);

// Smooth scalar-valued map (flat-scalar target).
MapField smooth_scalar_map(const GridGeometry& grid, double amplitude, uint64_t seed);

// Constant map to the sphere's first axis point (rho, 0, 0).
MapField constant_sphere_map(const GridGeometry& grid, double rho = 1.0);

// Tangent perturbation direction along a sphere map: P_phi applied to a
// smooth R^3 field.
MapField tangent_perturbation(const MapField& phi, double amplitude, uint64_t seed,
                              double rho = 1.0);

// Smooth vector field with low-wavenumber components.
VectorField smooth_vector(const GridGeometry& grid, double amplitude, uint64_t seed);

} // namespace fixtures
} // namespace rhflow
