#include "odin/derivative_gp.hpp"

namespace odin {

void compute_D_A(const CovMatrices &cov, const JitteredCholesky &chol_C, Matrix &D, Matrix &A) {
    // D = 'C C^{-1}  <=>  D^T = C^{-1} 'C^T, via triangular solves
    D = chol_C.solve(cov.deriv_first.transpose()).transpose();
    Matrix a = cov.deriv_both - D * cov.deriv_second;
    A = 0.5 * (a + a.transpose());
}

GPState build_gp_state(KernelFamily family, const KernelHyperparams &hp, const Vector &t) {
    GPState state;
    state.hyperparams = hp;
    state.cov = build_cov_matrices(family, hp, t);
    state.chol_C = cholesky_with_jitter(state.cov.value, hp.amplitude * hp.amplitude);
    state.jitter_used = state.chol_C.jitter;
    compute_D_A(state.cov, state.chol_C, state.D, state.A);
    return state;
}

double deriv_obs_base_jitter(const Matrix &a) {
    const double scale = a.trace() / static_cast<double>(a.rows());
    return 1e-8 * ((scale > 0.0 && std::isfinite(scale)) ? scale : 1.0);
}

JitteredCholesky deriv_obs_covariance(const Matrix &a, double gamma) {
    if (!(gamma >= 0.0)) throw DomainError("gamma must be non-negative");
    Matrix m = 0.5 * (a + a.transpose());
    m.diagonal().array() += gamma;
    return cholesky_with_fixed_jitter(m, deriv_obs_base_jitter(a));
}

}  // namespace odin
