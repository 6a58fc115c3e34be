#pragma once

#include "rhflow/target.hpp"
#include "rhflow/tensor_calculus.hpp"

namespace rhflow {

// Derivatives of a map phi: grid -> target. For sphere targets the intrinsic
// Hessian is the tangential projection P = I - phi phi^T/|phi|^2 of the
// coordinate Hessian, and the tension field is P applied to the
// Laplace-Beltrami of phi (equivalently Lap phi + (|grad phi|^2/rho^2) phi,
// realized so that it is exactly tangent at every node).
struct MapCalculus {
    // grad(node, lambda, i) = d_i phi^lambda; layout node * (d*m) + lambda*m + i
    detail::DenseField grad;
    ScalarField energy_density;  // |grad phi|^2 = g^{ij} d_i phi . d_j phi
    SymTensorField outer;        // (grad phi (x) grad phi)_ij = d_i phi . d_j phi
    // hessian(node, lambda, i, j) = (nabla_i nabla_j phi)^lambda, intrinsic
    detail::DenseField hessian;
    // tension(node, lambda) = (tau_g phi)^lambda
    detail::DenseField tension;

    int embedding_dim = 1;

    double grad_at(int node, int lam, int i) const {
        return grad.at(node, lam * grad.grid.dim + i);
    }
    double hess_at(int node, int lam, int i, int j) const {
        const int m = hessian.grid.dim;
        return hessian.at(node, (lam * m + i) * m + j);
    }
    double tension_at(int node, int lam) const { return tension.at(node, lam); }

    // |nabla^2 phi|^2 = g^{ik} g^{jl} nabla_i nabla_j phi . nabla_k nabla_l phi
    ScalarField hessian_norm2(const MetricAlgebra& alg) const;
    // |tau phi|^2 pointwise
    ScalarField tension_norm2() const;
    // |outer|^2 = g^{ik} g^{jl} outer_ij outer_kl
    ScalarField outer_norm2(const MetricAlgebra& alg) const;
};

// Throws FieldError if phi violates the target constraint beyond 1e-8.
MapCalculus map_calculus(const MetricField& g, const MapField& phi, const TargetSpec& target);
MapCalculus map_calculus(const MetricField& g, const MetricAlgebra& alg,
                         const ChristoffelField& gamma, const MapField& phi,
                         const TargetSpec& target);

// <Rm^N(d_i phi, d_j phi) d_j phi, d_i phi>: zero for flat targets; for the
// round sphere of radius rho this is (1/rho^2)(|grad phi|^4 - |outer|^2_g).
ScalarField target_curvature_term(const MetricField& g, const MapField& phi,
                                  const TargetSpec& target);
ScalarField target_curvature_term(const MetricAlgebra& alg, const MapCalculus& mc,
                                  const TargetSpec& target);

// S_ij = Ric_ij - alpha d_i phi . d_j phi and its trace S = R - alpha |grad phi|^2.
struct SFields {
    SymTensorField tensor;
    ScalarField trace;
};

SFields s_fields(const MetricField& g, const MapField& phi, const TargetSpec& target,
                 double alpha);
SFields s_fields(const MetricAlgebra& alg, const CurvatureSet& curv, const MapCalculus& mc,
                 double alpha);

// Worst deviation of |phi| from the target radius (0 for flat-scalar targets).
double target_constraint_violation(const MapField& phi, const TargetSpec& target);

// Rescale phi node-wise back onto the sphere (no-op for flat targets).
void project_to_target(MapField& phi, const TargetSpec& target);

} // namespace rhflow
