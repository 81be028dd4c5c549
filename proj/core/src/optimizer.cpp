#include "odin/optimizer.hpp"

#include <cmath>
#include <deque>

namespace odin {

namespace {

struct Pair {
    Vector s, y;
    double rho;
};

Vector two_loop(const Vector &g, const std::deque<Pair> &history) {
    Vector q = g;
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
        alpha[i] = history[i].rho * history[i].s.dot(q);
        q -= alpha[i] * history[i].y;
    }
    if (!history.empty()) {
        const Pair &last = history.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double beta = history[i].rho * history[i].y.dot(q);
        q += (alpha[i] - beta) * history[i].s;
    }
    return q;
}

/// Gradient with components pointing out of the feasible box zeroed.
Vector projected_gradient(const Vector &x, const Vector &g, const Bounds &b) {
    Vector pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if ((x[i] <= b.lower[i] && g[i] > 0.0) || (x[i] >= b.upper[i] && g[i] < 0.0)) pg[i] = 0.0;
    }
    return pg;
}

struct LineSearchResult {
    bool success = false;
    double alpha = 0.0;
    double value = 0.0;
    Vector x, grad;
    int evaluations = 0;
};

/// Strong Wolfe search along d, truncated at alpha_max (first bound crossing).
/// Non-finite objective values are treated as sufficient-decrease failures.
LineSearchResult strong_wolfe(const ObjectiveWithGrad &fg, const Vector &x0, double f0,
                              const Vector &d, double dphi0, double alpha_max, const Bounds &bounds,
                              const OptimizerSettings &st) {
    LineSearchResult res;
    Vector grad(x0.size());

    auto eval = [&](double a, double &phi, double &dphi, Vector &x_out) {
        x_out = bounds.clamp(x0 + a * d);
        phi = fg(x_out, grad);
        ++res.evaluations;
        dphi = std::isfinite(phi) ? grad.dot(d) : 0.0;
    };
    auto accept = [&](double a, double phi) {
        res.success = true;
        res.alpha = a;
        res.value = phi;
        res.grad = grad;
        return res;
    };

    const double c1 = st.wolfe_c1, c2 = st.wolfe_c2;

    auto zoom = [&](double lo, double f_lo, double hi) -> LineSearchResult {
        for (int it = 0; it < 50; ++it) {
            const double a = 0.5 * (lo + hi);
            double phi, dphi;
            eval(a, phi, dphi, res.x);
            if (!std::isfinite(phi) || phi > f0 + c1 * a * dphi0 || phi >= f_lo) {
                hi = a;
            } else {
                if (std::abs(dphi) <= -c2 * dphi0) return accept(a, phi);
                if (dphi * (hi - lo) >= 0.0) hi = lo;
                lo = a;
                f_lo = phi;
            }
            if (std::abs(hi - lo) < 1e-16 * (1.0 + std::abs(lo))) break;
        }
        // settle for the best Armijo point found, if any
        if (f_lo < f0 && lo > 0.0) {
            double phi, dphi;
            eval(lo, phi, dphi, res.x);
            if (std::isfinite(phi) && phi < f0) return accept(lo, phi);
        }
        return res;
    };

    double a_prev = 0.0, f_prev = f0;
    double a = std::min(1.0, alpha_max);
    for (int it = 0; it < 30; ++it) {
        double phi, dphi;
        eval(a, phi, dphi, res.x);
        if (!std::isfinite(phi) || phi > f0 + c1 * a * dphi0 || (it > 0 && phi >= f_prev)) {
            return zoom(a_prev, f_prev, a);
        }
        if (std::abs(dphi) <= -c2 * dphi0) return accept(a, phi);
        if (dphi >= 0.0) return zoom(a, phi, a_prev);
        if (a >= alpha_max * (1.0 - 1e-12)) {
            // sufficient decrease holds at the bound crossing; activate it
            return accept(a, phi);
        }
        a_prev = a;
        f_prev = phi;
        a = std::min(2.0 * a, alpha_max);
    }
    return res;
}

}  // namespace

const char *to_string(TerminationReason reason) {
    switch (reason) {
        case TerminationReason::GradientTolerance: return "gradient-tolerance";
        case TerminationReason::StepTolerance: return "step-tolerance";
        case TerminationReason::MaxIterations: return "max-iterations";
        case TerminationReason::LineSearchFailure: return "line-search-failure";
    }
    return "unknown";
}

OptimizerReport minimize(const ObjectiveWithGrad &fg, const Vector &x0, const Bounds &bounds,
                         const OptimizerSettings &settings) {
    const Eigen::Index n = x0.size();
    if (bounds.lower.size() != n || bounds.upper.size() != n) {
        throw std::invalid_argument("bounds dimension mismatch");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(bounds.lower[i] <= bounds.upper[i])) {
            throw std::invalid_argument("lower bound exceeds upper bound");
        }
    }

    OptimizerReport report;
    report.x = bounds.clamp(x0);
    Vector g(n);
    report.value = fg(report.x, g);
    report.evaluations = 1;
    if (!std::isfinite(report.value)) {
        throw std::invalid_argument("objective not finite at the initial point");
    }

    std::deque<Pair> history;
    report.reason = TerminationReason::MaxIterations;
    int tiny_streak = 0;

    for (int iter = 0; iter < settings.max_iterations; ++iter) {
        const Vector pg = projected_gradient(report.x, g, bounds);
        report.grad_norm = pg.lpNorm<Eigen::Infinity>();
        if (report.grad_norm <= settings.grad_tol * (1.0 + std::abs(report.value))) {
            report.reason = TerminationReason::GradientTolerance;
            return report;
        }
        report.iterations = iter + 1;

        Vector d = -two_loop(g, history);
        if (history.empty()) {
            // no curvature information yet: cap the trial move at unit size so
            // the line search starts at a sane scale even for huge gradients
            const double dn = d.lpNorm<Eigen::Infinity>();
            if (dn > 1.0) d /= dn;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((report.x[i] <= bounds.lower[i] && d[i] < 0.0) ||
                (report.x[i] >= bounds.upper[i] && d[i] > 0.0)) {
                d[i] = 0.0;
            }
        }
        double dphi0 = g.dot(d);
        bool steepest = false;
        if (!(dphi0 < -1e-14 * d.norm() * g.norm()) || d.isZero()) {
            d = -pg;
            const double dn = d.lpNorm<Eigen::Infinity>();
            if (dn > 1.0) d /= dn;
            dphi0 = g.dot(d);
            steepest = true;
        }

        double alpha_max = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (d[i] > 0.0 && std::isfinite(bounds.upper[i])) {
                alpha_max = std::min(alpha_max, (bounds.upper[i] - report.x[i]) / d[i]);
            } else if (d[i] < 0.0 && std::isfinite(bounds.lower[i])) {
                alpha_max = std::min(alpha_max, (bounds.lower[i] - report.x[i]) / d[i]);
            }
        }
        if (!(alpha_max > 0.0)) {
            report.reason = TerminationReason::LineSearchFailure;
            return report;
        }

        LineSearchResult ls =
            strong_wolfe(fg, report.x, report.value, d, dphi0, alpha_max, bounds, settings);
        if (!ls.success && !steepest) {
            // retry along the projected steepest descent direction
            report.evaluations += ls.evaluations;
            d = -pg;
            const double dn = d.lpNorm<Eigen::Infinity>();
            if (dn > 1.0) d /= dn;
            dphi0 = g.dot(d);
            alpha_max = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < n; ++i) {
                if (d[i] > 0.0 && std::isfinite(bounds.upper[i])) {
                    alpha_max = std::min(alpha_max, (bounds.upper[i] - report.x[i]) / d[i]);
                } else if (d[i] < 0.0 && std::isfinite(bounds.lower[i])) {
                    alpha_max = std::min(alpha_max, (bounds.lower[i] - report.x[i]) / d[i]);
                }
            }
            history.clear();
            if (alpha_max > 0.0) {
                ls = strong_wolfe(fg, report.x, report.value, d, dphi0, alpha_max, bounds,
                                  settings);
            }
        }
        report.evaluations += ls.evaluations;
        if (!ls.success) {
            report.reason = TerminationReason::LineSearchFailure;
            return report;
        }

        const Vector s = ls.x - report.x;
        const Vector y = ls.grad - g;
        const bool tiny_step =
            s.lpNorm<Eigen::Infinity>() <=
            settings.step_tol * (1.0 + report.x.lpNorm<Eigen::Infinity>());

        const double decrease = report.value - ls.value;
        report.x = ls.x;
        report.value = ls.value;
        g = ls.grad;

        if (tiny_step) {
            // a single tiny step can be a curvature artifact on an
            // ill-conditioned objective; require corroboration before stopping
            ++tiny_streak;
            history.clear();
            if (tiny_streak >= 5 || decrease <= 1e-13 * (1.0 + std::abs(report.value))) {
                report.grad_norm =
                    projected_gradient(report.x, g, bounds).lpNorm<Eigen::Infinity>();
                report.reason = TerminationReason::StepTolerance;
                return report;
            }
            continue;
        }
        tiny_streak = 0;

        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            history.push_back({s, y, 1.0 / sy});
            if (static_cast<int>(history.size()) > settings.memory) history.pop_front();
        }
    }

    report.grad_norm = projected_gradient(report.x, g, bounds).lpNorm<Eigen::Infinity>();
    return report;
}

OptimizerReport minimize(const std::function<double(const Vector &)> &objective,
                         const std::function<Vector(const Vector &)> &gradient, const Vector &x0,
                         const Bounds &bounds, const OptimizerSettings &settings) {
    ObjectiveWithGrad fg = [&](const Vector &x, Vector &grad) {
        const double f = objective(x);
        grad = std::isfinite(f) ? gradient(x) : Vector::Zero(x.size());
        return f;
    };
    return minimize(fg, x0, bounds, settings);
}

}  // namespace odin
