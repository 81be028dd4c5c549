#include "odin/integrator.hpp"

#include "odin/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace odin {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// embedded 4th-order weights
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

double error_norm(const Vector &err, const Vector &x_old, const Vector &x_new, double rtol,
                  double atol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(x_old[i]), std::abs(x_new[i]));
        const double e = err[i] / sc;
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

/// Hairer-Norsett-Wanner starting step heuristic.
double initial_step(const ODESystem &sys, const Vector &theta, double t0, const Vector &x0,
                    const Vector &f0, double t_end, double rtol, double atol) {
    auto scaled_norm = [&](const Vector &v, const Vector &ref) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double sc = atol + rtol * std::abs(ref[i]);
            const double e = v[i] / sc;
            acc += e * e;
        }
        return std::sqrt(acc / static_cast<double>(v.size()));
    };
    const double d0 = scaled_norm(x0, x0);
    const double d1 = scaled_norm(f0, x0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t_end - t0);

    const Vector x1 = x0 + h0 * f0;
    Vector f1;
    try {
        f1 = sys.f(x1, theta);
    } catch (const DomainError &) {
        return std::max(1e-6, 1e-3 * h0);
    }
    const double d2 = scaled_norm(f1 - f0, x0) / h0;
    double h1;
    if (std::max(d1, d2) <= 1e-15) {
        h1 = std::max(1e-6, h0 * 1e-3);
    } else {
        h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
    }
    return std::min({100.0 * h0, h1, t_end - t0});
}

}  // namespace

Matrix integrate(const ODESystem &system, const Vector &theta, const Vector &x0,
                 const Vector &t_out, const IntegratorSettings &settings) {
    check_grid(t_out);
    if (!x0.allFinite() || !theta.allFinite()) {
        throw DomainError("integrate: non-finite initial state or parameters");
    }
    const Eigen::Index n_out = t_out.size();
    const Eigen::Index dim = x0.size();
    Matrix out(n_out, dim);
    out.row(0) = x0.transpose();
    if (n_out == 1) return out;

    double t = t_out[0];
    const double t_end = t_out[n_out - 1];
    Vector x = x0;
    Vector k1 = system.f(x, theta);
    double h = initial_step(system, theta, t, x, k1, t_end, settings.rtol, settings.atol);

    Eigen::Index next_out = 1;
    std::size_t steps = 0;
    Vector k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim);

    while (next_out < n_out) {
        if (++steps > settings.max_steps) {
            throw IntegrationError("integrate: step budget exhausted", t);
        }
        if (!(h > std::abs(t) * 1e-15 + 1e-300)) {
            throw IntegrationError("integrate: step size underflow", t);
        }
        bool hit_output = false;
        double h_try = h;
        if (t + h >= t_out[next_out]) {
            h_try = t_out[next_out] - t;
            hit_output = true;
        }

        bool rejected_by_domain = false;
        Vector x_new, err;
        try {
            k2 = system.f(x + h_try * (a21 * k1), theta);
            k3 = system.f(x + h_try * (a31 * k1 + a32 * k2), theta);
            k4 = system.f(x + h_try * (a41 * k1 + a42 * k2 + a43 * k3), theta);
            k5 = system.f(x + h_try * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), theta);
            k6 = system.f(x + h_try * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5),
                          theta);
            x_new = x + h_try * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            k7 = system.f(x_new, theta);
            err = x_new -
                  (x + h_try * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));
        } catch (const DomainError &) {
            rejected_by_domain = true;
        }

        if (rejected_by_domain || !x_new.allFinite()) {
            h = 0.5 * h_try;
            continue;
        }

        const double err_norm = error_norm(err, x, x_new, settings.rtol, settings.atol);
        const double factor =
            (err_norm <= 1e-30) ? 5.0
                                : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
        if (err_norm <= 1.0) {
            t += h_try;
            x = x_new;
            k1 = k7;  // FSAL
            if (hit_output) {
                out.row(next_out) = x.transpose();
                ++next_out;
                // keep the natural step size across an output-truncated step
                if (factor >= 1.0) continue;
            }
        }
        h = h_try * factor;
    }
    return out;
}

}  // namespace odin
