#pragma once

#include "odin/common.hpp"

#include <optional>
#include <string>

namespace odin {

/// Observation times plus per-state noisy observations, optionally carrying
/// the simulation ground truth for scoring.
struct TimeSeriesDataset {
    Vector t;  ///< N observation times, strictly increasing
    Matrix y;  ///< N x K noisy observations

    std::optional<Matrix> true_states;  ///< N x K
    std::optional<Vector> true_theta;
    std::optional<Vector> true_x0;

    int num_obs() const { return static_cast<int>(t.size()); }
    int num_states() const { return static_cast<int>(y.cols()); }
};

}  // namespace odin
