#pragma once

#include "rhflow/fields.hpp"

namespace rhflow {

// Discrete Riemannian calculus on periodic grids. All spatial derivatives are
// 4th-order central differences; every function is pure.
//
// Curvature sign convention, fixed once for the whole project:
//   R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_ip Gamma^p_jk
//                                             - Gamma^l_jp Gamma^p_ik,
//   R_lkij  = g_lm R^m_kij,     Ric_ij = g^{kl} R_kilj,     R = g^{ij} Ric_ij.
// With this choice round spheres have positive scalar curvature (R = 2/c on a
// sphere of Gauss curvature 1/c), verified against chart and conformal oracles
// in the tests.

struct MetricAlgebra {
    SymTensorField inverse;      // g^{ij}
    ScalarField det;             // det(g)
    ScalarField volume_weight;   // sqrt(det g) * h^m, the nodal dV weight
};

// Throws FieldError naming the worst node if g is not SPD (smallest eigenvalue
// below `spd_floor`).
MetricAlgebra metric_algebra(const MetricField& g, double spd_floor = 1e-8);

// Smallest metric eigenvalue over all nodes (SPD margin diagnostic).
double min_metric_eigenvalue(const MetricField& g);

ChristoffelField christoffel(const MetricField& g);
ChristoffelField christoffel(const MetricField& g, const MetricAlgebra& alg);

struct CurvatureSet {
    FullCurvatureField riemann;  // R_ijkl (fully lowered)
    SymTensorField ricci;        // Ric_ij
    ScalarField scalar;          // R
};

CurvatureSet curvature(const MetricField& g);
CurvatureSet curvature(const MetricField& g, const MetricAlgebra& alg,
                       const ChristoffelField& gamma);

// Lichnerowicz Laplacian on symmetric 2-tensors:
//   Dl t_ij = D t_ij + 2 R_ipjq t^{pq} - Ric_i^p t_pj - Ric_j^p t_pi,
// where D is the (covariant) rough Laplacian.
SymTensorField lichnerowicz_laplacian(const MetricField& g, const SymTensorField& t);
SymTensorField lichnerowicz_laplacian(const MetricField& g, const MetricAlgebra& alg,
                                      const ChristoffelField& gamma,
                                      const CurvatureSet& curv, const SymTensorField& t);

struct ScalarCalculus {
    VectorField grad;       // covariant gradient components d_i f
    SymTensorField hessian; // Hess(f)_ij = d_i d_j f - Gamma^k_ij d_k f
    ScalarField laplacian;  // g^{ij} Hess(f)_ij
};

ScalarCalculus scalar_calculus(const MetricField& g, const ScalarField& f);
ScalarCalculus scalar_calculus(const MetricField& g, const MetricAlgebra& alg,
                               const ChristoffelField& gamma, const ScalarField& f);

// Integral of a scalar field against dV = sqrt(det g) h^m.
double integrate(const MetricAlgebra& alg, const ScalarField& f);
double integrate(const MetricField& g, const ScalarField& f);
double volume(const MetricField& g);

// Pointwise |grad f|^2 = g^{ij} d_i f d_j f.
ScalarField grad_norm2(const MetricField& g, const MetricAlgebra& alg, const ScalarField& f);

// Pointwise squared tensor norm |t|^2 = g^{ik} g^{jl} t_ij t_kl.
ScalarField tensor_norm2(const MetricAlgebra& alg, const SymTensorField& t);

// Pointwise |Rm|^2 = g^{ia}g^{jb}g^{kc}g^{ld} R_ijkl R_abcd.
ScalarField riemann_norm2(const MetricAlgebra& alg, const FullCurvatureField& rm);

// Covariant divergence (div t)_j = g^{ik} (d_i t_kj - Gamma^p_ik t_pj - Gamma^p_ij t_kp).
VectorField divergence(const MetricField& g, const MetricAlgebra& alg,
                       const ChristoffelField& gamma, const SymTensorField& t);

} // namespace rhflow
