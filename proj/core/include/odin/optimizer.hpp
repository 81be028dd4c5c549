#pragma once

#include "odin/common.hpp"

#include <functional>
#include <limits>

namespace odin {

/// Elementwise box; entries may be +-infinity.
struct Bounds {
    Vector lower;
    Vector upper;

    static Bounds unbounded(Eigen::Index n) {
        Bounds b;
        b.lower = Vector::Constant(n, -std::numeric_limits<double>::infinity());
        b.upper = Vector::Constant(n, std::numeric_limits<double>::infinity());
        return b;
    }

    Vector clamp(const Vector &x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

enum class TerminationReason {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    LineSearchFailure,
};

const char *to_string(TerminationReason reason);

struct OptimizerSettings {
    int memory = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    double grad_tol = 1e-6;   ///< on the projected gradient inf-norm, scaled by 1+|f|
    double step_tol = 1e-10;
    int max_iterations = 2000;
};

struct OptimizerReport {
    Vector x;
    double value = 0.0;
    double grad_norm = 0.0;  ///< projected gradient inf-norm at the final point
    int iterations = 0;
    int evaluations = 0;
    TerminationReason reason = TerminationReason::MaxIterations;
};

/// Objective returning the value and filling the gradient. A non-finite value
/// is treated as an infeasible point by the line search.
using ObjectiveWithGrad = std::function<double(const Vector &x, Vector &grad)>;

/// Limited-memory BFGS with gradient projection for the box and a strong
/// Wolfe line search truncated at the first bound crossing. Accepted iterates
/// are clamped exactly onto active bounds.
OptimizerReport minimize(const ObjectiveWithGrad &fg, const Vector &x0, const Bounds &bounds,
                         const OptimizerSettings &settings = {});

/// Convenience overload with separate value and gradient callbacks.
OptimizerReport minimize(const std::function<double(const Vector &)> &objective,
                         const std::function<Vector(const Vector &)> &gradient, const Vector &x0,
                         const Bounds &bounds, const OptimizerSettings &settings = {});

}  // namespace odin
