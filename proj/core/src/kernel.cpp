#include "odin/kernel.hpp"

#include <cmath>

namespace odin {

namespace {

constexpr double kSqrt5 = 2.23606797749978969;

struct Rbf {
    double v2, inv_l2;

    double value(double r) const { return v2 * std::exp(-0.5 * r * r * inv_l2); }
    double deriv_r(double r) const { return -r * inv_l2 * value(r); }
    // d^2/(da db) k(a - b) = -k''(r)
    double deriv_ab(double r) const { return (inv_l2 - r * r * inv_l2 * inv_l2) * value(r); }
    double deriv_log_l(double r) const { return value(r) * r * r * inv_l2; }
};

struct Matern52 {
    double v2, inv_l;

    double value(double r) const {
        const double s = kSqrt5 * std::abs(r) * inv_l;
        return v2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    double deriv_r(double r) const {
        const double s = kSqrt5 * std::abs(r) * inv_l;
        return -(5.0 / 3.0) * v2 * inv_l * inv_l * r * (1.0 + s) * std::exp(-s);
    }
    double deriv_ab(double r) const {
        const double s = kSqrt5 * std::abs(r) * inv_l;
        return (5.0 / 3.0) * v2 * inv_l * inv_l * (1.0 + s - s * s) * std::exp(-s);
    }
    double deriv_log_l(double r) const {
        const double s = kSqrt5 * std::abs(r) * inv_l;
        return v2 * (s * s / 3.0) * (1.0 + s) * std::exp(-s);
    }
};

void check_inputs(const KernelHyperparams &hp, double a, double b) {
    hp.validate();
    if (!std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("kernel: non-finite time input");
    }
}

template <typename F>
double dispatch(KernelFamily family, const KernelHyperparams &hp, F &&fn) {
    const double v2 = hp.amplitude * hp.amplitude;
    if (family == KernelFamily::RBF) {
        return fn(Rbf{v2, 1.0 / (hp.lengthscale * hp.lengthscale)});
    }
    return fn(Matern52{v2, 1.0 / hp.lengthscale});
}

}  // namespace

void KernelHyperparams::validate() const {
    if (!(amplitude > 0.0) || !(lengthscale > 0.0) || !(noise_sigma >= 0.0) ||
        !std::isfinite(amplitude) || !std::isfinite(lengthscale) || !std::isfinite(noise_sigma)) {
        throw DomainError("kernel hyperparameters out of range");
    }
}

double kernel_eval(KernelFamily family, const KernelHyperparams &hp, double a, double b) {
    check_inputs(hp, a, b);
    return dispatch(family, hp, [&](auto k) { return k.value(a - b); });
}

double kernel_deriv_a(KernelFamily family, const KernelHyperparams &hp, double a, double b) {
    check_inputs(hp, a, b);
    return dispatch(family, hp, [&](auto k) { return k.deriv_r(a - b); });
}

double kernel_deriv_b(KernelFamily family, const KernelHyperparams &hp, double a, double b) {
    return -kernel_deriv_a(family, hp, a, b);
}

double kernel_deriv_ab(KernelFamily family, const KernelHyperparams &hp, double a, double b) {
    check_inputs(hp, a, b);
    return dispatch(family, hp, [&](auto k) { return k.deriv_ab(a - b); });
}

double kernel_deriv_log_lengthscale(KernelFamily family, const KernelHyperparams &hp, double a,
                                    double b) {
    check_inputs(hp, a, b);
    return dispatch(family, hp, [&](auto k) { return k.deriv_log_l(a - b); });
}

void check_grid(const Vector &t) {
    if (t.size() < 1) throw InvalidGridError("empty time grid");
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i])) throw InvalidGridError("non-finite time grid entry");
        if (i > 0 && !(t[i] > t[i - 1])) throw InvalidGridError("time grid not strictly increasing");
    }
}

CovMatrices build_cov_matrices(KernelFamily family, const KernelHyperparams &hp, const Vector &t) {
    hp.validate();
    check_grid(t);
    const Eigen::Index n = t.size();
    CovMatrices m;
    m.value.resize(n, n);
    m.deriv_first.resize(n, n);
    m.deriv_second.resize(n, n);
    m.deriv_both.resize(n, n);
    dispatch(family, hp, [&](auto k) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double r = t[i] - t[j];
                m.value(i, j) = k.value(r);
                m.deriv_first(i, j) = k.deriv_r(r);
                m.deriv_second(i, j) = -k.deriv_r(r);
                m.deriv_both(i, j) = k.deriv_ab(r);
            }
        }
        return 0.0;
    });
    return m;
}

}  // namespace odin
