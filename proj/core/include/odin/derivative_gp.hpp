#pragma once

#include "odin/kernel.hpp"
#include "odin/linalg.hpp"

namespace odin {

/// Per-state precomputed GP matrices for the derivative process.
/// D maps states to conditional derivative means, A is the conditional
/// covariance of the derivatives given the states.
struct GPState {
    KernelHyperparams hyperparams;
    CovMatrices cov;            ///< C, 'C, C', C''
    Matrix D;                   ///< 'C C^{-1}
    Matrix A;                   ///< C'' - 'C C^{-1} C', symmetrized
    JitteredCholesky chol_C;    ///< factor of C (+ jitter)
    double jitter_used = 0.0;
};

/// D = 'C C^{-1} via triangular solves, A = C'' - 'C C^{-1} C' symmetrized.
void compute_D_A(const CovMatrices &cov, const JitteredCholesky &chol_C, Matrix &D, Matrix &A);

/// Builds the full per-state GP state from a grid and hyperparameters.
GPState build_gp_state(KernelFamily family, const KernelHyperparams &hp, const Vector &t);

/// Cholesky factor of A + gamma I (+ jitter relative to trace(A)/N).
JitteredCholesky deriv_obs_covariance(const Matrix &a, double gamma);

/// The deterministic base jitter applied to A + gamma I before factorization.
double deriv_obs_base_jitter(const Matrix &a);

}  // namespace odin
