#include "odin/risk.hpp"

#include <cmath>

namespace odin {

namespace {

/// F with the vector field applied row-wise.
Matrix ode_outputs(const Matrix &x, const Vector &theta, const ODESystem &system) {
    const Eigen::Index n = x.rows();
    Matrix f_obs(n, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        f_obs.row(i) = system.f(x.row(i).transpose(), theta).transpose();
    }
    return f_obs;
}

struct FactorInfo {
    JitteredCholesky chol;
    double log_det = 0.0;
    double trace_inv = 0.0;
};

FactorInfo make_factor(const RiskContext::StateTerm &term, double gamma) {
    Matrix m = term.gp.A;
    m.diagonal().array() += gamma;
    FactorInfo info;
    info.chol = cholesky_with_fixed_jitter(m, term.base_jitter_A);
    info.log_det = info.chol.log_det();
    const Eigen::Index n = m.rows();
    info.trace_inv = info.chol.solve(Matrix::Identity(n, n)).trace();
    return info;
}

}  // namespace

RiskContext build_risk_context(const Vector &t, const Matrix &y, KernelFamily family,
                               const std::vector<KernelHyperparams> &hyperparams,
                               const ODESystem &system) {
    if (static_cast<Eigen::Index>(hyperparams.size()) != y.cols()) {
        throw std::invalid_argument("one hyperparameter set per state required");
    }
    if (system.state_dim != static_cast<int>(y.cols())) {
        throw std::invalid_argument("system dimension does not match observations");
    }
    RiskContext ctx;
    ctx.system = system;
    ctx.num_obs = static_cast<int>(t.size());
    ctx.states.reserve(hyperparams.size());
    for (Eigen::Index k = 0; k < y.cols(); ++k) {
        RiskContext::StateTerm term;
        term.gp = build_gp_state(family, hyperparams[static_cast<std::size_t>(k)], t);
        term.y = y.col(k);
        term.sigma = hyperparams[static_cast<std::size_t>(k)].noise_sigma;
        if (!(term.sigma > 0.0)) {
            throw std::invalid_argument("risk context requires positive noise sigma");
        }
        term.base_jitter_A = deriv_obs_base_jitter(term.gp.A);
        ctx.states.push_back(std::move(term));
    }
    return ctx;
}

double risk_tilde(const Matrix &x, const Matrix &f_obs, const RiskContext &ctx,
                  const Vector &gamma) {
    double total = 0.0;
    for (int k = 0; k < ctx.num_states(); ++k) {
        const auto &term = ctx.states[static_cast<std::size_t>(k)];
        const Vector xk = x.col(k);
        const Vector residual = f_obs.col(k) - term.gp.D * xk;
        const FactorInfo factor = make_factor(term, gamma[k]);
        total += xk.dot(term.gp.chol_C.solve(xk));
        total += (xk - term.y).squaredNorm() / (term.sigma * term.sigma);
        total += factor.chol.quad_form_inv(residual);
    }
    return total;
}

double risk_full(const Matrix &x, const Vector &theta, const Vector &gamma,
                 const RiskContext &ctx) {
    double total = risk_tilde(x, ode_outputs(x, theta, ctx.system), ctx, gamma);
    for (int k = 0; k < ctx.num_states(); ++k) {
        total += make_factor(ctx.states[static_cast<std::size_t>(k)], gamma[k]).log_det;
    }
    return total;
}

RiskGradient risk_gradient(const Matrix &x, const Vector &theta, const Vector &gamma,
                           const RiskContext &ctx) {
    const int n = ctx.num_obs;
    const int num_states = ctx.num_states();
    const int num_params = ctx.system.param_count;

    RiskGradient grad;
    grad.d_x = Matrix::Zero(n, num_states);
    grad.d_theta = Vector::Zero(num_params);
    grad.d_gamma = Vector::Zero(num_states);

    const Matrix f_obs = ode_outputs(x, theta, ctx.system);

    // u_k = (A_k + gamma_k I)^{-1} (F_k - D_k x_k)
    Matrix u(n, num_states);
    for (int k = 0; k < num_states; ++k) {
        const auto &term = ctx.states[static_cast<std::size_t>(k)];
        const Vector xk = x.col(k);
        const Vector residual = f_obs.col(k) - term.gp.D * xk;
        const FactorInfo factor = make_factor(term, gamma[k]);
        u.col(k) = factor.chol.solve(residual);
        grad.d_x.col(k) = 2.0 * term.gp.chol_C.solve(xk) +
                          (2.0 / (term.sigma * term.sigma)) * (xk - term.y) -
                          2.0 * term.gp.D.transpose() * u.col(k);
        grad.d_gamma[k] = factor.trace_inv - u.col(k).squaredNorm();
    }

    // vector-field coupling, one Jacobian pair per grid point
    for (int i = 0; i < n; ++i) {
        const Vector xi = x.row(i).transpose();
        const Matrix jx = ctx.system.jac_x(xi, theta);
        const Matrix jth = ctx.system.jac_theta(xi, theta);
        const Vector ui = u.row(i).transpose();
        grad.d_x.row(i) += 2.0 * (jx.transpose() * ui).transpose();
        grad.d_theta += 2.0 * jth.transpose() * ui;
    }
    return grad;
}

RiskEvaluator::RiskEvaluator(std::shared_ptr<const RiskContext> ctx) : ctx_(std::move(ctx)) {
    cached_gamma_.assign(static_cast<std::size_t>(ctx_->num_states()),
                         std::numeric_limits<double>::quiet_NaN());
    cached_chol_.resize(static_cast<std::size_t>(ctx_->num_states()));
    cached_trace_inv_.assign(cached_gamma_.size(), 0.0);
    cached_log_det_.assign(cached_gamma_.size(), 0.0);
}

int RiskEvaluator::dim() const {
    return ctx_->num_obs * ctx_->num_states() + ctx_->system.param_count + ctx_->num_states();
}

Vector RiskEvaluator::pack(const Matrix &x, const Vector &theta, const Vector &gamma) const {
    Vector z(dim());
    const int nk = ctx_->num_obs * ctx_->num_states();
    z.head(nk) = Eigen::Map<const Vector>(x.data(), nk);
    z.segment(nk, theta.size()) = theta;
    z.tail(gamma.size()) = gamma;
    return z;
}

void RiskEvaluator::unpack(const Vector &z, Matrix &x, Vector &theta, Vector &gamma) const {
    const int n = ctx_->num_obs;
    const int k = ctx_->num_states();
    x = Eigen::Map<const Matrix>(z.data(), n, k);
    theta = z.segment(n * k, ctx_->system.param_count);
    gamma = z.tail(k);
}

const JitteredCholesky &RiskEvaluator::chol_for(int k, double gamma) {
    const auto idx = static_cast<std::size_t>(k);
    const double cached = cached_gamma_[idx];
    if (!(std::abs(gamma - cached) <= 1e-12 * std::abs(cached))) {
        const FactorInfo info = make_factor(ctx_->states[idx], gamma);
        cached_chol_[idx] = info.chol;
        cached_trace_inv_[idx] = info.trace_inv;
        cached_log_det_[idx] = info.log_det;
        cached_gamma_[idx] = gamma;
    }
    return cached_chol_[idx];
}

double RiskEvaluator::operator()(const Vector &z, Vector &grad) {
    const int n = ctx_->num_obs;
    const int num_states = ctx_->num_states();
    const int num_params = ctx_->system.param_count;

    Matrix x;
    Vector theta, gamma;
    unpack(z, x, theta, gamma);
    grad = Vector::Zero(z.size());

    Matrix f_obs;
    try {
        f_obs = ode_outputs(x, theta, ctx_->system);
    } catch (const DomainError &) {
        return std::numeric_limits<double>::infinity();
    }

    double value = 0.0;
    Matrix d_x(n, num_states);
    Vector d_theta = Vector::Zero(num_params);
    Vector d_gamma(num_states);
    Matrix u(n, num_states);

    for (int k = 0; k < num_states; ++k) {
        const auto &term = ctx_->states[static_cast<std::size_t>(k)];
        const Vector xk = x.col(k);
        const Vector residual = f_obs.col(k) - term.gp.D * xk;
        const JitteredCholesky &chol = chol_for(k, gamma[k]);
        const Vector cinv_x = term.gp.chol_C.solve(xk);
        u.col(k) = chol.solve(residual);

        value += xk.dot(cinv_x);
        value += (xk - term.y).squaredNorm() / (term.sigma * term.sigma);
        value += residual.dot(u.col(k));
        value += cached_log_det_[static_cast<std::size_t>(k)];

        d_x.col(k) = 2.0 * cinv_x + (2.0 / (term.sigma * term.sigma)) * (xk - term.y) -
                     2.0 * term.gp.D.transpose() * u.col(k);
        d_gamma[k] = cached_trace_inv_[static_cast<std::size_t>(k)] - u.col(k).squaredNorm();
    }

    try {
        for (int i = 0; i < n; ++i) {
            const Vector xi = x.row(i).transpose();
            const Matrix jx = ctx_->system.jac_x(xi, theta);
            const Matrix jth = ctx_->system.jac_theta(xi, theta);
            const Vector ui = u.row(i).transpose();
            d_x.row(i) += 2.0 * (jx.transpose() * ui).transpose();
            d_theta += 2.0 * jth.transpose() * ui;
        }
    } catch (const DomainError &) {
        return std::numeric_limits<double>::infinity();
    }

    grad.head(n * num_states) = Eigen::Map<const Vector>(d_x.data(), n * num_states);
    grad.segment(n * num_states, num_params) = d_theta;
    grad.tail(num_states) = d_gamma;
    return value;
}

}  // namespace odin
