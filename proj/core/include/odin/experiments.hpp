#pragma once

#include "odin/integrator.hpp"
#include "odin/odin.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace odin {

struct NoiseSpec {
    NoiseMode mode = NoiseMode::AbsoluteSigma;
    double value = 0.1;

    /// Resolve to per-state sigma. SNR converts as
    /// sigma_k = population_std(true state k over the grid) / sqrt(SNR).
    Vector resolve_sigma(const Matrix &true_states) const;
};

/// Integrates the true trajectory at high accuracy and adds independent
/// Gaussian noise; ground truth is stored alongside.
TimeSeriesDataset generate_dataset(const ODESystem &system, const Vector &theta, const Vector &x0,
                                   const Vector &grid, const NoiseSpec &noise, std::uint64_t seed);

/// Convenience: canonical theta*, x0 and grid of the system.
TimeSeriesDataset generate_dataset(const ODESystem &system, const NoiseSpec &noise,
                                   std::uint64_t seed);

struct TrajectoryRmse {
    Vector per_state;      ///< K
    double total = 0.0;
    bool integration_failed = false;  ///< values are +inf sentinels
};

/// (1/N) * ||x_tilde - x*||_2 per state and on the stacked vector, where
/// x_tilde integrates the system under theta_hat from the true initial value.
/// With conventional = true the norm is divided by sqrt(N) instead.
TrajectoryRmse trajectory_rmse(const Vector &theta_hat, const ODESystem &system,
                               const Matrix &true_states, const Vector &true_x0,
                               const Vector &grid, bool conventional = false);

/// Root mean squared error per state between two N x K state matrices.
Vector state_rmse(const Matrix &estimate, const Matrix &truth);

/// GP posterior mean + least-squares gradient matching with fixed unit
/// weights; the reference point for relative-quality checks.
Vector naive_gradient_matching(const TimeSeriesDataset &dataset, const ODESystem &system,
                               const OdinConfig &config);

/// Sorted-midpoint quantile (linear interpolation) over finite values;
/// sentinel (non-finite) entries are excluded and counted by the caller.
double quantile(std::vector<double> values, double q);

struct ExperimentRecord {
    std::string system;
    std::string noise_mode;
    double noise_value = 0.0;
    std::uint64_t seed = 0;
    double trmse_total = 0.0;
    Vector trmse_per_state;
    double state_rmse_odin = 0.0;  ///< total over states
    double state_rmse_gpr = 0.0;
    Vector gamma;
    Vector theta;
    double runtime_seconds = 0.0;
    bool failed = false;
};

struct RunSettings {
    int reps = 20;
    std::uint64_t master_seed = 0;
    int threads = 0;  ///< 0 = hardware concurrency
    bool conventional_rmse = false;
    OdinConfig config;
};

std::string experiment_csv_header(int num_states, int num_params);
std::string experiment_csv_row(const ExperimentRecord &record);

std::vector<ExperimentRecord> run_parameter_inference(const ODESystem &system,
                                                      const NoiseSpec &noise,
                                                      const RunSettings &settings);

struct ModelSelectionRow {
    std::string model;
    Vector gamma_median;  ///< per state
    Vector gamma_std;
};

/// Runs the four Lotka-Volterra candidates against data from the true model.
std::vector<ModelSelectionRow> run_model_selection(const NoiseSpec &noise,
                                                   const RunSettings &settings);

struct ScalingRow {
    int dim = 0;
    double mean_seconds = 0.0;
    double std_seconds = 0.0;
};

struct ScalingResult {
    std::vector<ScalingRow> rows;
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};

ScalingResult run_scaling(const std::vector<int> &dims, const RunSettings &settings);

struct StateInferenceRow {
    std::uint64_t seed = 0;
    Vector rmse_odin;  ///< per state
    Vector rmse_gpr;
    double total_odin = 0.0;
    double total_gpr = 0.0;
};

std::vector<StateInferenceRow> run_state_inference(const ODESystem &system, const NoiseSpec &noise,
                                                   const RunSettings &settings);

// --- file formats ---

/// Dataset CSV: header t,y1,...,yK; one row per observation time.
void write_dataset_csv(std::ostream &out, const TimeSeriesDataset &dataset);
TimeSeriesDataset read_dataset_csv(std::istream &in);

/// Result JSON with fields theta, gamma, states (row-major N x K),
/// hyperparams, risk, seed, runtime_seconds, manifest.
std::string result_to_json(const OdinResult &result, const std::string &system_name,
                           const std::string &manifest);

}  // namespace odin
