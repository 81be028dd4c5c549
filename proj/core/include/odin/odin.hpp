#pragma once

#include "odin/dataset.hpp"
#include "odin/gp.hpp"
#include "odin/optimizer.hpp"
#include "odin/risk.hpp"

#include <optional>

namespace odin {

struct OdinConfig {
    KernelFamily family = KernelFamily::RBF;

    int eb_restarts = 10;       ///< empirical-Bayes restarts per state
    int theta_restarts = 1;     ///< random parameter initializations, best risk wins
    std::uint64_t seed = 0;

    double gamma_init = 1.0;
    double gamma_lower_bound = kGammaLowerBound;
    bool fixed_gamma = false;   ///< keep gamma at gamma_init instead of optimizing it

    double theta_init_low = 0.0;   ///< uniform initialization range for theta
    double theta_init_high = 1.0;

    std::optional<Vector> theta_lower, theta_upper;  ///< optional box on theta
    std::optional<double> state_lower, state_upper;  ///< optional box on all states

    OptimizerSettings optimizer;
};

struct OdinResult {
    Matrix states;    ///< N x K
    Vector theta;     ///< P
    Vector gamma;     ///< K
    std::vector<KernelHyperparams> hyperparams;  ///< per state, original units
    double risk = 0.0;
    OptimizerReport report;
    StandardizationTransform transform;
    double runtime_seconds = 0.0;
    std::uint64_t seed = 0;
};

/// The full two-step procedure: per-state standardized GP fitting with
/// empirical Bayes, initialization of the states at the GP posterior means,
/// then joint bound-constrained minimization of the gamma-augmented risk
/// over (x, theta, gamma).
OdinResult fit(const TimeSeriesDataset &dataset, const ODESystem &system,
               const OdinConfig &config);

/// Step 1 only: per-state GP posterior means in original units.
Matrix gp_baseline(const TimeSeriesDataset &dataset, const OdinConfig &config);

}  // namespace odin
