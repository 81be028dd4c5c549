#include "odin/odin.hpp"

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>

namespace odin {

namespace {

struct Step1Result {
    std::vector<KernelHyperparams> hyperparams;  ///< original units
    Matrix posterior_means;                      ///< original units
    StandardizationTransform transform;
};

/// Standardize, fit per-state hyperparameters by empirical Bayes, map back to
/// original units and compute the posterior means there.
Step1Result run_step1(const TimeSeriesDataset &dataset, const OdinConfig &config) {
    const StandardizedData std_data = standardize(dataset.t, dataset.y);
    const int num_states = dataset.num_states();

    Step1Result out;
    out.transform = std_data.transform;
    out.posterior_means.resize(dataset.num_obs(), num_states);
    out.hyperparams.reserve(static_cast<std::size_t>(num_states));

    for (int k = 0; k < num_states; ++k) {
        GpFitSettings fit_settings;
        fit_settings.restarts = config.eb_restarts;
        fit_settings.seed = mix_seed(config.seed, static_cast<std::uint64_t>(k));
        const KernelHyperparams hp_std =
            fit_hyperparameters(std_data.y.col(k), std_data.t, config.family, fit_settings);
        const KernelHyperparams hp = map_hyperparams_to_original(hp_std, std_data.transform, k);
        out.posterior_means.col(k) = posterior(dataset.y.col(k), dataset.t, config.family, hp).mean;
        out.hyperparams.push_back(hp);
    }
    return out;
}

/// Per-state eigendecomposition of A, used for the closed-form gamma step.
struct StateEig {
    Matrix q;
    Vector lam;  ///< eigenvalues of A plus the deterministic base jitter
};

/// Residual f_k(x, theta) - D_k x_k for one state; empty optional when the
/// vector field is undefined at the point.
std::optional<Vector> state_residual(const RiskContext &ctx, const Matrix &x,
                                     const Vector &theta, int k) {
    const auto &term = ctx.states[static_cast<std::size_t>(k)];
    const int n = ctx.num_obs;
    Vector f_k(n);
    for (int i = 0; i < n; ++i) {
        try {
            f_k[i] = ctx.system.f(x.row(i).transpose(), theta)[k];
        } catch (const DomainError &) {
            return std::nullopt;
        }
    }
    if (!f_k.allFinite()) return std::nullopt;
    return f_k - term.gp.D * x.col(k);
}

/// Exact minimizer over gamma_k of r^T (A + gamma I)^{-1} r + log det(A + gamma I)
/// on [lower, inf). The objective is a smooth one-dimensional function of gamma
/// through the eigenvalues of A; golden-section search on log gamma suffices.
double optimal_gamma(const StateEig &eig, const Vector &residual, double lower) {
    const Vector rt = eig.q.transpose() * residual;
    const Eigen::Index n = rt.size();
    auto q = [&](double g) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = std::max(eig.lam[i], 0.0) + g;
            acc += rt[i] * rt[i] / m + std::log(m);
        }
        return acc;
    };
    double lo = std::log(lower), hi = std::log(1e8);
    const double gr = 0.618033988749895;
    double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
    double fa = q(std::exp(a)), fb = q(std::exp(b));
    for (int it = 0; it < 120; ++it) {
        if (fa < fb) {
            hi = b; b = a; fb = fa;
            a = hi - gr * (hi - lo); fa = q(std::exp(a));
        } else {
            lo = a; a = b; fa = fb;
            b = lo + gr * (hi - lo); fb = q(std::exp(b));
        }
    }
    double g = std::exp(0.5 * (lo + hi));
    if (q(lower) <= q(g)) g = lower;
    return std::max(g, lower);
}

/// Levenberg-Marquardt on the exact nonlinear-least-squares structure of the
/// risk at fixed gamma: stacked whitened residuals
///   L_C^{-1} x_k,  (x_k - y_k)/sigma_k,  L_M^{-1} (f_k(x,theta) - D_k x_k)
/// over the joint unknowns (x, theta). Returns iterations used; x and theta
/// are updated in place and kept inside the box.
int lm_states_theta(const RiskContext &ctx, Matrix &x, Vector &theta, const Vector &gamma,
                    const Bounds &bounds, int nk, int num_params, int max_iters) {
    const int n = ctx.num_obs;
    const int num_states = ctx.num_states();
    const int dim = nk + num_params;

    std::vector<Matrix> linv_c(static_cast<std::size_t>(num_states));
    std::vector<Matrix> linv_m(static_cast<std::size_t>(num_states));
    for (int k = 0; k < num_states; ++k) {
        const auto &term = ctx.states[static_cast<std::size_t>(k)];
        const Matrix lc = term.gp.chol_C.llt.matrixL();
        linv_c[static_cast<std::size_t>(k)] =
            lc.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
        Matrix m = term.gp.A;
        m.diagonal().array() += gamma[k];
        const JitteredCholesky chol_m = cholesky_with_fixed_jitter(m, term.base_jitter_A);
        const Matrix lm = chol_m.llt.matrixL();
        linv_m[static_cast<std::size_t>(k)] =
            lm.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
    }

    auto residuals = [&](const Matrix &xx, const Vector &tt, Vector &r) -> bool {
        r.resize(3 * nk);
        for (int k = 0; k < num_states; ++k) {
            const auto &term = ctx.states[static_cast<std::size_t>(k)];
            Vector f_k(n);
            for (int i = 0; i < n; ++i) {
                try {
                    f_k[i] = ctx.system.f(xx.row(i).transpose(), tt)[k];
                } catch (const DomainError &) {
                    return false;
                }
            }
            r.segment(3 * n * k, n) = linv_c[static_cast<std::size_t>(k)] * xx.col(k);
            r.segment(3 * n * k + n, n) = (xx.col(k) - term.y) / term.sigma;
            r.segment(3 * n * k + 2 * n, n) =
                linv_m[static_cast<std::size_t>(k)] * (f_k - term.gp.D * xx.col(k));
        }
        return r.allFinite();
    };

    Vector r;
    if (!residuals(x, theta, r)) return 0;
    double lambda = 1e-3;
    int iters = 0;
    bool converged = false;
    for (; iters < max_iters && !converged; ++iters) {
        Matrix jac = Matrix::Zero(3 * nk, dim);
        for (int k = 0; k < num_states; ++k) {
            const auto &term = ctx.states[static_cast<std::size_t>(k)];
            jac.block(3 * n * k, n * k, n, n) = linv_c[static_cast<std::size_t>(k)];
            jac.block(3 * n * k + n, n * k, n, n).diagonal().setConstant(1.0 / term.sigma);
            Matrix dfdx = Matrix::Zero(n, nk);
            Matrix dfdth(n, num_params);
            for (int i = 0; i < n; ++i) {
                const Vector xi = x.row(i).transpose();
                const Matrix jx = ctx.system.jac_x(xi, theta);
                for (int k2 = 0; k2 < num_states; ++k2) dfdx(i, n * k2 + i) = jx(k, k2);
                dfdth.row(i) = ctx.system.jac_theta(xi, theta).row(k);
            }
            dfdx.block(0, n * k, n, n) -= term.gp.D;
            jac.block(3 * n * k + 2 * n, 0, n, nk) =
                linv_m[static_cast<std::size_t>(k)] * dfdx;
            jac.block(3 * n * k + 2 * n, nk, n, num_params) =
                linv_m[static_cast<std::size_t>(k)] * dfdth;
        }
        const Matrix hess = jac.transpose() * jac;
        const Vector grad = jac.transpose() * r;
        if (grad.lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + r.squaredNorm())) break;

        bool accepted = false;
        for (int tries = 0; tries < 25; ++tries) {
            Matrix hl = hess;
            hl.diagonal() += lambda * hess.diagonal().cwiseMax(1e-12);
            const Vector step = hl.ldlt().solve(-grad);
            Matrix x_new = x;
            for (int k = 0; k < num_states; ++k) x_new.col(k) += step.segment(n * k, n);
            Vector theta_new = theta + step.tail(num_params);
            // project onto the box
            for (int k = 0; k < num_states; ++k) {
                for (int i = 0; i < n; ++i) {
                    double &v = x_new(i, k);
                    v = std::min(std::max(v, bounds.lower[n * k + i]), bounds.upper[n * k + i]);
                }
            }
            for (int p = 0; p < num_params; ++p) {
                theta_new[p] = std::min(std::max(theta_new[p], bounds.lower[nk + p]),
                                        bounds.upper[nk + p]);
            }
            Vector r_new;
            if (residuals(x_new, theta_new, r_new) &&
                r_new.squaredNorm() < r.squaredNorm()) {
                const double decrease = r.squaredNorm() - r_new.squaredNorm();
                x = x_new;
                theta = theta_new;
                r = r_new;
                lambda = std::max(lambda * 0.33, 1e-12);
                accepted = true;
                if (decrease <= 1e-12 * (1.0 + r.squaredNorm())) converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) break;
    }
    return iters;
}

}  // namespace

OdinResult fit(const TimeSeriesDataset &dataset, const ODESystem &system,
               const OdinConfig &config) {
    if (dataset.num_obs() < 3) throw std::invalid_argument("need at least 3 observations");
    if (dataset.num_states() != system.state_dim) {
        throw std::invalid_argument("observation dimension does not match the system");
    }
    const auto t_start = std::chrono::steady_clock::now();

    const Step1Result step1 = run_step1(dataset, config);

    auto ctx = std::make_shared<const RiskContext>(build_risk_context(
        dataset.t, dataset.y, config.family, step1.hyperparams, system));

    const int n = dataset.num_obs();
    const int num_states = dataset.num_states();
    const int num_params = system.param_count;
    const int nk = n * num_states;
    const double inf = std::numeric_limits<double>::infinity();

    Bounds bounds = Bounds::unbounded(nk + num_params + num_states);
    if (config.state_lower) bounds.lower.head(nk).setConstant(*config.state_lower);
    if (config.state_upper) bounds.upper.head(nk).setConstant(*config.state_upper);
    if (config.theta_lower) bounds.lower.segment(nk, num_params) = *config.theta_lower;
    if (config.theta_upper) bounds.upper.segment(nk, num_params) = *config.theta_upper;
    if (config.fixed_gamma) {
        bounds.lower.tail(num_states).setConstant(config.gamma_init);
        bounds.upper.tail(num_states).setConstant(config.gamma_init);
    } else {
        bounds.lower.tail(num_states).setConstant(config.gamma_lower_bound);
        bounds.upper.tail(num_states).setConstant(inf);
    }

    const Vector gamma0 = Vector::Constant(num_states, config.gamma_init);

    // Eigendecomposition of each A (with its deterministic base jitter), used
    // for the closed-form gamma minimization between state/theta steps.
    std::vector<StateEig> eig_a(static_cast<std::size_t>(num_states));
    for (int k = 0; k < num_states; ++k) {
        const auto &term = ctx->states[static_cast<std::size_t>(k)];
        Eigen::SelfAdjointEigenSolver<Matrix> es(term.gp.A);
        eig_a[static_cast<std::size_t>(k)].q = es.eigenvectors();
        eig_a[static_cast<std::size_t>(k)].lam =
            es.eigenvalues().array() + term.base_jitter_A;
    }

    // Per-state diag(C^{-1}) never changes during the optimization.
    std::vector<Vector> c_inv_diag(static_cast<std::size_t>(num_states));
    for (int k = 0; k < num_states; ++k) {
        const Matrix c_inv =
            ctx->states[static_cast<std::size_t>(k)].gp.chol_C.solve(Matrix::Identity(n, n));
        c_inv_diag[static_cast<std::size_t>(k)] = c_inv.diagonal();
    }

    // Gauss-Newton diagonal of the risk at the point z. The curvature spans
    // many orders of magnitude (sigma^{-2} data terms for near-noiseless
    // states, (A + gamma I)^{-1} mismatch terms once gamma collapses to its
    // bound) and plain L-BFGS stalls on it; scaling every variable by the
    // inverse square root of its curvature diagonal equalizes the landscape.
    auto gn_scale = [&](const Matrix &x, const Vector &theta,
                        const Vector &gamma) -> Vector {
        Vector scale = Vector::Ones(nk + num_params + num_states);
        Vector theta_diag = Vector::Zero(num_params);
        try {
        for (int k = 0; k < num_states; ++k) {
            const auto &term = ctx->states[static_cast<std::size_t>(k)];
            Matrix m = term.gp.A;
            m.diagonal().array() += gamma[k];
            const JitteredCholesky chol_m =
                cholesky_with_fixed_jitter(m, term.base_jitter_A);
            const Matrix m_inv = chol_m.solve(Matrix::Identity(n, n));
            const Matrix m_inv_d = m_inv * term.gp.D;
            Vector f_k(n), jx_kk(n);
            Matrix j_theta_k(n, num_params);
            for (int i = 0; i < n; ++i) {
                const Vector xi = x.row(i).transpose();
                f_k[i] = system.f(xi, theta)[k];
                jx_kk[i] = system.jac_x(xi, theta)(k, k);
                j_theta_k.row(i) = system.jac_theta(xi, theta).row(k);
            }
            for (int i = 0; i < n; ++i) {
                // d r_k / d x_ik = jac_x(i)_kk e_i - D_k col i (cross-state
                // Jacobian entries are omitted; a diagonal estimate suffices)
                const double h = 2.0 * c_inv_diag[static_cast<std::size_t>(k)][i] +
                                 2.0 / (term.sigma * term.sigma) +
                                 2.0 * (jx_kk[i] * (jx_kk[i] * m_inv(i, i) -
                                                    2.0 * m_inv_d(i, i)) +
                                        term.gp.D.col(i).dot(m_inv_d.col(i)));
                scale[k * n + i] = 1.0 / std::sqrt(std::max(h, 1.0));
            }
            const Matrix m_inv_j = m_inv * j_theta_k;
            for (int p = 0; p < num_params; ++p) {
                theta_diag[p] += 2.0 * j_theta_k.col(p).dot(m_inv_j.col(p));
            }
            const Vector residual = f_k - term.gp.D * x.col(k);
            const Vector u = m_inv * residual;
            const double h_gamma = m_inv.squaredNorm() + 2.0 * u.dot(m_inv * u);
            scale[nk + num_params + k] = 1.0 / std::sqrt(std::max(h_gamma, 1.0));
        }
        for (int p = 0; p < num_params; ++p) {
            scale[nk + p] = 1.0 / std::sqrt(std::max(theta_diag[p], 1.0));
        }
        } catch (const DomainError &) {
            return Vector::Ones(nk + num_params + num_states);
        }
        return scale;
    };

    // One round of L-BFGS under the affine change of variables z = ref +
    // scale .* w; used for large problems (where dense LM is too expensive)
    // and for the final joint polish over (x, theta, gamma).
    auto scaled_lbfgs_round = [&](RiskEvaluator &evaluator, Vector &z,
                                  const Bounds &round_bounds, int iteration_cap) {
        Matrix x_cur;
        Vector theta_cur, gamma_cur;
        evaluator.unpack(z, x_cur, theta_cur, gamma_cur);
        const Vector scale = gn_scale(x_cur, theta_cur, gamma_cur);
        const Vector ref = z;

        Vector grad_z(z.size());
        ObjectiveWithGrad fg = [&](const Vector &w, Vector &grad) {
            const double value = evaluator(ref + w.cwiseProduct(scale), grad_z);
            grad = grad_z.cwiseProduct(scale);
            return value;
        };
        Bounds scaled_bounds;
        scaled_bounds.lower = (round_bounds.lower - ref).cwiseQuotient(scale);
        scaled_bounds.upper = (round_bounds.upper - ref).cwiseQuotient(scale);

        OptimizerSettings round_settings = config.optimizer;
        round_settings.max_iterations = iteration_cap;
        const OptimizerReport report =
            minimize(fg, Vector::Zero(z.size()), scaled_bounds, round_settings);

        // map back, snapping coordinates that sit exactly on a scaled bound
        // onto the original bound
        z = ref + report.x.cwiseProduct(scale);
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            if (report.x[i] == scaled_bounds.lower[i]) z[i] = round_bounds.lower[i];
            if (report.x[i] == scaled_bounds.upper[i]) z[i] = round_bounds.upper[i];
        }
        z = round_bounds.clamp(z);
        return report;
    };

    // Dense LM scales cubically with N*K; beyond this size fall back to the
    // scaled L-BFGS rounds, which only need matrix-vector work per state.
    const bool use_lm = nk + num_params <= 256;

    OdinResult best;
    bool have_best = false;
    const int restarts = std::max(1, config.theta_restarts);
    for (int r = 0; r < restarts; ++r) {
        Rng rng(mix_seed(config.seed, 0x7000u + static_cast<std::uint64_t>(r)));
        Vector theta0(num_params);
        for (int p = 0; p < num_params; ++p) {
            theta0[p] = rng.uniform(config.theta_init_low, config.theta_init_high);
        }

        RiskEvaluator evaluator(ctx);
        Vector z = bounds.clamp(evaluator.pack(step1.posterior_means, theta0, gamma0));

        OptimizerReport total;
        total.x = z;
        total.reason = TerminationReason::MaxIterations;
        {
            Vector g0(z.size());
            total.value = evaluator(z, g0);
            total.evaluations = 1;
        }

        // Alternation: minimize over (x, theta) at fixed gamma, then update
        // each gamma_k exactly through the eigenvalues of A_k. Both steps
        // decrease the same risk, so the outer loop is monotone.
        int budget = config.optimizer.max_iterations;
        double prev_risk = total.value;
        Matrix x_cur;
        Vector theta_cur, gamma_cur;
        for (int outer = 0; outer < 120 && budget > 0; ++outer) {
            evaluator.unpack(z, x_cur, theta_cur, gamma_cur);

            int used = 0;
            if (use_lm) {
                used = lm_states_theta(*ctx, x_cur, theta_cur, gamma_cur, bounds, nk,
                                       num_params, std::min(200, budget));
                z = evaluator.pack(x_cur, theta_cur, gamma_cur);
                total.iterations += used;
                total.evaluations += used;
            } else {
                Bounds fixed = bounds;
                fixed.lower.tail(num_states) = gamma_cur;
                fixed.upper.tail(num_states) = gamma_cur;
                const OptimizerReport rep =
                    scaled_lbfgs_round(evaluator, z, fixed, std::min(500, budget));
                used = std::max(1, rep.iterations);
                total.iterations += rep.iterations;
                total.evaluations += rep.evaluations;
                evaluator.unpack(z, x_cur, theta_cur, gamma_cur);
            }
            budget -= std::max(1, used);

            if (!config.fixed_gamma) {
                for (int k = 0; k < num_states; ++k) {
                    const auto residual = state_residual(*ctx, x_cur, theta_cur, k);
                    if (!residual) continue;  // infeasible point: keep gamma
                    gamma_cur[k] = optimal_gamma(eig_a[static_cast<std::size_t>(k)],
                                                 *residual, config.gamma_lower_bound);
                }
                z = evaluator.pack(x_cur, theta_cur, gamma_cur);
            }

            Vector g(z.size());
            const double risk_now = evaluator(z, g);
            ++total.evaluations;
            total.value = risk_now;
            total.x = z;
            const bool progress = prev_risk - risk_now > 1e-10 * (1.0 + std::abs(risk_now));
            prev_risk = risk_now;
            if (!progress) break;
        }

        // Joint polish over (x, theta, gamma) with the projected L-BFGS; this
        // also produces the first-order report at the returned point.
        if (budget > 0 && config.optimizer.max_iterations > 0 &&
            std::isfinite(total.value)) {
            const OptimizerReport rep =
                scaled_lbfgs_round(evaluator, z, bounds, std::min(200, budget));
            total.iterations += rep.iterations;
            total.evaluations += rep.evaluations;
            total.grad_norm = rep.grad_norm;
            total.reason = rep.reason;
            if (rep.value <= total.value) {
                total.value = rep.value;
                total.x = z;
            }
        }

        if (!have_best || total.value < best.risk) {
            have_best = true;
            best.risk = total.value;
            best.report = total;
            RiskEvaluator unpacker(ctx);
            unpacker.unpack(total.x, best.states, best.theta, best.gamma);
        }
    }

    best.hyperparams = step1.hyperparams;
    best.transform = step1.transform;
    best.seed = config.seed;
    best.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return best;
}

Matrix gp_baseline(const TimeSeriesDataset &dataset, const OdinConfig &config) {
    if (dataset.num_obs() < 3) throw std::invalid_argument("need at least 3 observations");
    return run_step1(dataset, config).posterior_means;
}

}  // namespace odin
