#pragma once

#include <stdexcept>

namespace rhflow {

// Target manifold of the map: either the flat scalar line or a round sphere
// S^n of radius rho embedded in R^{n+1}. The sectional curvature bound c0
// feeds the energy-density estimates.
struct TargetSpec {
    enum class Kind { FlatScalar, Sphere };

    Kind kind = Kind::FlatScalar;
    int embedding_dim = 1;
    double radius = 1.0;

    static TargetSpec flat_scalar() { return TargetSpec{}; }

    static TargetSpec sphere(int n = 2, double rho = 1.0) {
        if (!(rho > 0.0)) throw std::invalid_argument("TargetSpec: radius must be positive");
        TargetSpec t;
        t.kind = Kind::Sphere;
        t.embedding_dim = n + 1;
        t.radius = rho;
        return t;
    }

    bool is_sphere() const { return kind == Kind::Sphere; }

    // Upper bound on the sectional curvature of the target.
    double curvature_bound() const {
        return kind == Kind::Sphere ? 1.0 / (radius * radius) : 0.0;
    }
};

} // namespace rhflow
