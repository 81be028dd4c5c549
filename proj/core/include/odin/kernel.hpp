#pragma once

#include "odin/common.hpp"

namespace odin {

enum class KernelFamily { RBF, Matern52 };

/// Per-state kernel hyperparameters plus observation noise.
struct KernelHyperparams {
    double amplitude = 1.0;    ///< signal standard deviation, state units
    double lengthscale = 1.0;  ///< time units
    double noise_sigma = 0.1;  ///< observation noise standard deviation

    void validate() const;
};

/// k(a, b). Symmetric, k(a, a) = amplitude^2.
double kernel_eval(KernelFamily family, const KernelHyperparams &hp, double a, double b);

/// d/da k(a, b).
double kernel_deriv_a(KernelFamily family, const KernelHyperparams &hp, double a, double b);

/// d/db k(a, b).
double kernel_deriv_b(KernelFamily family, const KernelHyperparams &hp, double a, double b);

/// d^2/(da db) k(a, b).
double kernel_deriv_ab(KernelFamily family, const KernelHyperparams &hp, double a, double b);

/// d/d(log lengthscale) k(a, b), used by the marginal-likelihood gradient.
double kernel_deriv_log_lengthscale(KernelFamily family, const KernelHyperparams &hp, double a,
                                    double b);

/// The four covariance matrices over an observation grid. Naming follows the
/// argument being differentiated: deriv_first = d/da, deriv_second = d/db,
/// deriv_both = d^2/(da db).
struct CovMatrices {
    Matrix value;         ///< C
    Matrix deriv_first;   ///< 'C
    Matrix deriv_second;  ///< C'
    Matrix deriv_both;    ///< C''
};

/// Requires t strictly increasing. deriv_first == deriv_second.transpose().
CovMatrices build_cov_matrices(KernelFamily family, const KernelHyperparams &hp, const Vector &t);

void check_grid(const Vector &t);

}  // namespace odin
