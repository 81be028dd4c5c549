#pragma once

#include "odin/dataset.hpp"
#include "odin/kernel.hpp"

#include <vector>

namespace odin {

/// Affine map taking time and each state to zero mean / unit (population)
/// standard deviation. A constant state gets scale 1 and a warning flag.
struct StandardizationTransform {
    double t_shift = 0.0;
    double t_scale = 1.0;
    Vector y_shift;  ///< K
    Vector y_scale;  ///< K
    std::vector<bool> degenerate_state;  ///< scale fell back to 1

    double standardize_time(double t) const { return (t - t_shift) / t_scale; }
    double unstandardize_time(double t) const { return t * t_scale + t_shift; }
    double standardize_value(double v, int k) const { return (v - y_shift[k]) / y_scale[k]; }
    double unstandardize_value(double v, int k) const { return v * y_scale[k] + y_shift[k]; }
};

struct StandardizedData {
    Vector t;
    Matrix y;
    StandardizationTransform transform;
};

/// Requires N >= 2 and non-constant t.
StandardizedData standardize(const Vector &t, const Matrix &y);

/// Stationary-kernel scaling: lengthscale by t_scale, amplitude and noise by
/// the state's y_scale. Exact for RBF and Matern.
KernelHyperparams map_hyperparams_to_original(const KernelHyperparams &hp_std,
                                              const StandardizationTransform &transform, int state);

/// log N(y | 0, C + sigma^2 I) via Cholesky.
double log_marginal_likelihood(const Vector &y, const Vector &t, KernelFamily family,
                               const KernelHyperparams &hp);

/// Value plus gradient with respect to (log amplitude, log lengthscale,
/// log noise_sigma), in that order.
double log_marginal_likelihood_grad(const Vector &y, const Vector &t, KernelFamily family,
                                    const KernelHyperparams &hp, Eigen::Vector3d &grad);

struct GpFitSettings {
    int restarts = 10;
    std::uint64_t seed = 0;
    // log-uniform initialization ranges (standardized units)
    double lengthscale_low = 0.1, lengthscale_high = 2.0;
    double amplitude_low = 0.5, amplitude_high = 2.0;
    double noise_low = 0.01, noise_high = 1.0;
};

/// Empirical Bayes: maximize the log marginal likelihood over log-parameters,
/// multi-restart, deterministic given the seed. Expects standardized data.
KernelHyperparams fit_hyperparameters(const Vector &y, const Vector &t, KernelFamily family,
                                      const GpFitSettings &settings);

struct GpPosterior {
    Vector mean;
    Matrix cov;
};

/// mean = C (C + sigma^2 I)^{-1} y,  cov = sigma^2 (C + sigma^2 I)^{-1} C.
GpPosterior posterior(const Vector &y, const Vector &t, KernelFamily family,
                      const KernelHyperparams &hp);

}  // namespace odin
