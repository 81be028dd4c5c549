#include "odin/gp.hpp"

#include "odin/linalg.hpp"
#include "odin/optimizer.hpp"

#include <cmath>

namespace odin {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/// C + sigma^2 I with the escalating-jitter factorization.
JitteredCholesky noisy_cov_factor(const Matrix &c, const KernelHyperparams &hp) {
    Matrix k = c;
    k.diagonal().array() += hp.noise_sigma * hp.noise_sigma;
    return cholesky_with_jitter(k, hp.amplitude * hp.amplitude);
}

Matrix kernel_matrix(KernelFamily family, const KernelHyperparams &hp, const Vector &t) {
    const Eigen::Index n = t.size();
    Matrix c(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            c(i, j) = kernel_eval(family, hp, t[i], t[j]);
            c(j, i) = c(i, j);
        }
    return c;
}

}  // namespace

StandardizedData standardize(const Vector &t, const Matrix &y) {
    if (t.size() < 2) throw InvalidGridError("standardize requires at least two observations");
    const Eigen::Index n = t.size();
    const Eigen::Index k = y.cols();
    if (y.rows() != n) throw InvalidGridError("time grid and observations disagree in length");

    StandardizedData out;
    out.transform.t_shift = t.mean();
    const double t_var = (t.array() - out.transform.t_shift).square().mean();
    if (!(t_var > 0.0)) throw InvalidGridError("constant time grid");
    out.transform.t_scale = std::sqrt(t_var);

    out.transform.y_shift.resize(k);
    out.transform.y_scale.resize(k);
    out.transform.degenerate_state.assign(static_cast<std::size_t>(k), false);

    out.t = (t.array() - out.transform.t_shift) / out.transform.t_scale;
    out.y.resize(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double mean = y.col(j).mean();
        const double var = (y.col(j).array() - mean).square().mean();
        double scale = std::sqrt(var);
        if (!(scale > 0.0)) {
            scale = 1.0;
            out.transform.degenerate_state[static_cast<std::size_t>(j)] = true;
        }
        out.transform.y_shift[j] = mean;
        out.transform.y_scale[j] = scale;
        out.y.col(j) = (y.col(j).array() - mean) / scale;
    }
    return out;
}

KernelHyperparams map_hyperparams_to_original(const KernelHyperparams &hp_std,
                                              const StandardizationTransform &transform,
                                              int state) {
    KernelHyperparams hp = hp_std;
    hp.lengthscale = hp_std.lengthscale * transform.t_scale;
    hp.amplitude = hp_std.amplitude * transform.y_scale[state];
    hp.noise_sigma = hp_std.noise_sigma * transform.y_scale[state];
    return hp;
}

double log_marginal_likelihood(const Vector &y, const Vector &t, KernelFamily family,
                               const KernelHyperparams &hp) {
    hp.validate();
    check_grid(t);
    const Matrix c = kernel_matrix(family, hp, t);
    const JitteredCholesky chol = noisy_cov_factor(c, hp);
    const double n = static_cast<double>(t.size());
    return -0.5 * chol.quad_form_inv(y) - 0.5 * chol.log_det() - 0.5 * n * kLog2Pi;
}

double log_marginal_likelihood_grad(const Vector &y, const Vector &t, KernelFamily family,
                                    const KernelHyperparams &hp, Eigen::Vector3d &grad) {
    hp.validate();
    check_grid(t);
    const Eigen::Index n = t.size();
    const Matrix c = kernel_matrix(family, hp, t);
    const JitteredCholesky chol = noisy_cov_factor(c, hp);

    const Vector alpha = chol.solve(y);
    const Matrix k_inv = chol.solve(Matrix::Identity(n, n));

    Matrix dk_log_l(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            dk_log_l(i, j) = kernel_deriv_log_lengthscale(family, hp, t[i], t[j]);
            dk_log_l(j, i) = dk_log_l(i, j);
        }

    const Matrix outer_minus_inv = alpha * alpha.transpose() - k_inv;
    // d/dpsi = 0.5 tr((alpha alpha^T - K^{-1}) dK/dpsi)
    grad[0] = 0.5 * (outer_minus_inv.cwiseProduct(2.0 * c)).sum();
    grad[1] = 0.5 * (outer_minus_inv.cwiseProduct(dk_log_l)).sum();
    const double sigma2 = hp.noise_sigma * hp.noise_sigma;
    grad[2] = 0.5 * 2.0 * sigma2 * outer_minus_inv.trace();

    return -0.5 * y.dot(alpha) - 0.5 * chol.log_det() - 0.5 * static_cast<double>(n) * kLog2Pi;
}

KernelHyperparams fit_hyperparameters(const Vector &y, const Vector &t, KernelFamily family,
                                      const GpFitSettings &settings) {
    if (settings.restarts < 1) throw std::invalid_argument("restarts must be >= 1");

    // box on log-parameters keeps the likelihood surface factorizable
    Bounds bounds;
    bounds.lower = Vector(3);
    bounds.upper = Vector(3);
    bounds.lower << std::log(1e-3), std::log(1e-3), std::log(1e-6);
    bounds.upper << std::log(1e3), std::log(1e3), std::log(1e3);

    OptimizerSettings opt;
    opt.max_iterations = 200;

    auto to_hp = [](const Vector &u) {
        KernelHyperparams hp;
        hp.amplitude = std::exp(u[0]);
        hp.lengthscale = std::exp(u[1]);
        hp.noise_sigma = std::exp(u[2]);
        return hp;
    };

    ObjectiveWithGrad fg = [&](const Vector &u, Vector &grad) {
        Eigen::Vector3d g;
        double lml;
        try {
            lml = log_marginal_likelihood_grad(y, t, family, to_hp(u), g);
        } catch (const NumericalError &) {
            grad = Vector::Zero(3);
            return std::numeric_limits<double>::infinity();
        }
        grad = -g;
        return -lml;
    };

    Rng rng(settings.seed);
    bool have_best = false;
    double best_value = std::numeric_limits<double>::infinity();
    KernelHyperparams best;
    for (int r = 0; r < settings.restarts; ++r) {
        Vector u0(3);
        u0 << std::log(rng.log_uniform(settings.amplitude_low, settings.amplitude_high)),
            std::log(rng.log_uniform(settings.lengthscale_low, settings.lengthscale_high)),
            std::log(rng.log_uniform(settings.noise_low, settings.noise_high));
        try {
            const OptimizerReport report = minimize(fg, u0, bounds, opt);
            if (!have_best || report.value < best_value) {
                have_best = true;
                best_value = report.value;
                best = to_hp(report.x);
            }
        } catch (const NumericalError &) {
            continue;  // restart unusable, try the next one
        }
    }
    if (!have_best) throw NumericalError("hyperparameter fitting failed in every restart");
    return best;
}

GpPosterior posterior(const Vector &y, const Vector &t, KernelFamily family,
                      const KernelHyperparams &hp) {
    hp.validate();
    check_grid(t);
    const Matrix c = kernel_matrix(family, hp, t);
    const JitteredCholesky chol = noisy_cov_factor(c, hp);

    GpPosterior post;
    post.mean = c * chol.solve(y);
    const double sigma2 = hp.noise_sigma * hp.noise_sigma;
    Matrix cov = sigma2 * chol.solve(c);
    post.cov = 0.5 * (cov + cov.transpose());
    return post;
}

}  // namespace odin
