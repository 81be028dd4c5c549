#pragma once

#include "odin/derivative_gp.hpp"
#include "odin/ode_models.hpp"

#include <memory>
#include <vector>

namespace odin {

constexpr double kGammaLowerBound = 1e-6;

/// Everything the objective needs that does not change during optimization:
/// per-state GP matrices and factors, observations, noise levels and the ODE
/// system. Immutable after construction, safe to share across threads.
struct RiskContext {
    struct StateTerm {
        GPState gp;
        Vector y;
        double sigma = 0.0;
        double base_jitter_A = 0.0;  ///< deterministic jitter for A + gamma I
    };

    std::vector<StateTerm> states;  ///< size K
    ODESystem system;
    int num_obs = 0;

    int num_states() const { return static_cast<int>(states.size()); }
};

RiskContext build_risk_context(const Vector &t, const Matrix &y, KernelFamily family,
                               const std::vector<KernelHyperparams> &hyperparams,
                               const ODESystem &system);

/// The objective with F kept free: sum over states of
///   x^T C^{-1} x + ||x - y||^2 / sigma^2 + (F - Dx)^T (A + gamma I)^{-1} (F - Dx).
double risk_tilde(const Matrix &x, const Matrix &f_obs, const RiskContext &ctx,
                  const Vector &gamma);

/// risk_tilde with F = f(x, theta) substituted, plus sum_k log det(A_k + gamma_k I).
double risk_full(const Matrix &x, const Vector &theta, const Vector &gamma,
                 const RiskContext &ctx);

struct RiskGradient {
    Matrix d_x;      ///< N x K
    Vector d_theta;  ///< P
    Vector d_gamma;  ///< K
};

RiskGradient risk_gradient(const Matrix &x, const Vector &theta, const Vector &gamma,
                           const RiskContext &ctx);

/// Flat-vector adapter for the optimizer over z = [vec(x); theta; gamma].
/// Caches the Cholesky of A_k + gamma_k I across calls; gamma rarely moves
/// beyond relative 1e-12 between line-search probes. Not thread-safe; use one
/// evaluator per concurrent optimization.
class RiskEvaluator {
  public:
    explicit RiskEvaluator(std::shared_ptr<const RiskContext> ctx);

    int dim() const;
    Vector pack(const Matrix &x, const Vector &theta, const Vector &gamma) const;
    void unpack(const Vector &z, Matrix &x, Vector &theta, Vector &gamma) const;

    /// Value and gradient; DomainError from the vector field maps to +inf so
    /// the line search backtracks instead of aborting.
    double operator()(const Vector &z, Vector &grad);

    const RiskContext &context() const { return *ctx_; }

  private:
    std::shared_ptr<const RiskContext> ctx_;
    std::vector<double> cached_gamma_;
    std::vector<JitteredCholesky> cached_chol_;
    std::vector<double> cached_trace_inv_;
    std::vector<double> cached_log_det_;

    const JitteredCholesky &chol_for(int k, double gamma);
    friend double risk_full(const Matrix &, const Vector &, const Vector &, const RiskContext &);
};

}  // namespace odin
