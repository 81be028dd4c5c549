#pragma once

#include "odin/common.hpp"

#include <functional>
#include <string>

namespace odin {

/// How an observation-noise preset is expressed.
enum class NoiseMode { AbsoluteSigma, Snr };

struct NoisePreset {
    NoiseMode mode;
    double value;
};

/// A registered parametric vector field with Jacobians and the canonical
/// benchmark configuration (true parameters, initial state, observation grid,
/// noise presets).
struct ODESystem {
    std::string name;
    int state_dim = 0;
    int param_count = 0;

    std::function<Vector(const Vector &x, const Vector &theta)> f;
    std::function<Matrix(const Vector &x, const Vector &theta)> jac_x;      ///< K x K
    std::function<Matrix(const Vector &x, const Vector &theta)> jac_theta;  ///< K x P

    Vector theta_true;
    Vector x0;
    Vector time_grid;
    NoisePreset noise_low{NoiseMode::AbsoluteSigma, 0.1};
    NoisePreset noise_high{NoiseMode::AbsoluteSigma, 0.5};
};

ODESystem lotka_volterra();

enum class FhnSignConvention {
    Paper,     ///< recovery equation exactly as printed in the source material
    Standard,  ///< negated recovery equation, the classic oscillatory form
};

ODESystem fitzhugh_nagumo(FhnSignConvention convention = FhnSignConvention::Standard);

ODESystem protein_transduction();

ODESystem lorenz96(int dim);

/// Lotka-Volterra model-selection candidates. i selects the equation for the
/// first state (1 = true form, 0 = wrong form theta_a x1^2 + theta_b x2),
/// j likewise for the second state (0 = wrong form -theta_c x2).
ODESystem lv_misspecified(int i, int j);

/// Lookup by CLI name: lv, fhn, pt, lorenz96, lorenz96-<K>, lv-m00, lv-m01,
/// lv-m10, lv-m11. Throws std::invalid_argument for unknown names.
ODESystem lookup_system(const std::string &name);

}  // namespace odin
