#include "odin/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace odin {

namespace {

/// Runs fn(0..count-1) on a small worker pool; results come back in index
/// order regardless of completion order.
template <typename T, typename Fn>
std::vector<T> parallel_map(int count, int threads, Fn &&fn) {
    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads <= 0) threads = 1;
    }
    threads = std::min(threads, count);
    std::vector<T> results(static_cast<std::size_t>(count));
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) results[static_cast<std::size_t>(i)] = fn(i);
        return results;
    }
    std::atomic<int> next{0};
    std::vector<std::future<void>> workers;
    workers.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        workers.push_back(std::async(std::launch::async, [&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                results[static_cast<std::size_t>(i)] = fn(i);
            }
        }));
    }
    for (auto &worker : workers) worker.get();
    return results;
}

double population_std(const Vector &v) {
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().mean());
}

double stacked_rmse(const Matrix &a, const Matrix &b) {
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

Vector NoiseSpec::resolve_sigma(const Matrix &true_states) const {
    const Eigen::Index k = true_states.cols();
    Vector sigma(k);
    if (mode == NoiseMode::AbsoluteSigma) {
        if (value < 0.0) throw std::invalid_argument("negative noise sigma");
        sigma.setConstant(value);
    } else {
        if (!(value > 0.0)) throw std::invalid_argument("SNR must be positive");
        for (Eigen::Index j = 0; j < k; ++j) {
            sigma[j] = population_std(true_states.col(j)) / std::sqrt(value);
        }
    }
    return sigma;
}

TimeSeriesDataset generate_dataset(const ODESystem &system, const Vector &theta, const Vector &x0,
                                   const Vector &grid, const NoiseSpec &noise,
                                   std::uint64_t seed) {
    TimeSeriesDataset dataset;
    dataset.t = grid;
    const Matrix truth = integrate(system, theta, x0, grid);
    const Vector sigma = noise.resolve_sigma(truth);

    Rng rng(seed);
    dataset.y = truth;
    for (Eigen::Index k = 0; k < truth.cols(); ++k) {
        if (sigma[k] == 0.0) continue;
        for (Eigen::Index i = 0; i < truth.rows(); ++i) {
            dataset.y(i, k) += sigma[k] * rng.gaussian();
        }
    }
    dataset.true_states = truth;
    dataset.true_theta = theta;
    dataset.true_x0 = x0;
    return dataset;
}

TimeSeriesDataset generate_dataset(const ODESystem &system, const NoiseSpec &noise,
                                   std::uint64_t seed) {
    return generate_dataset(system, system.theta_true, system.x0, system.time_grid, noise, seed);
}

TrajectoryRmse trajectory_rmse(const Vector &theta_hat, const ODESystem &system,
                               const Matrix &true_states, const Vector &true_x0, const Vector &grid,
                               bool conventional) {
    TrajectoryRmse out;
    const double n = static_cast<double>(grid.size());
    const double denom = conventional ? std::sqrt(n) : n;

    Matrix traj;
    try {
        IntegratorSettings settings;
        settings.rtol = 1e-6;
        settings.atol = 1e-8;
        traj = integrate(system, theta_hat, true_x0, grid, settings);
    } catch (const std::exception &) {
        out.integration_failed = true;
        out.per_state = Vector::Constant(true_states.cols(),
                                         std::numeric_limits<double>::infinity());
        out.total = std::numeric_limits<double>::infinity();
        return out;
    }

    out.per_state.resize(true_states.cols());
    for (Eigen::Index k = 0; k < true_states.cols(); ++k) {
        out.per_state[k] = (traj.col(k) - true_states.col(k)).norm() / denom;
    }
    out.total = (traj - true_states).norm() / denom;
    return out;
}

Vector state_rmse(const Matrix &estimate, const Matrix &truth) {
    Vector out(truth.cols());
    for (Eigen::Index k = 0; k < truth.cols(); ++k) {
        out[k] = std::sqrt((estimate.col(k) - truth.col(k)).squaredNorm() /
                           static_cast<double>(truth.rows()));
    }
    return out;
}

Vector naive_gradient_matching(const TimeSeriesDataset &dataset, const ODESystem &system,
                               const OdinConfig &config) {
    const StandardizedData std_data = standardize(dataset.t, dataset.y);
    const int n = dataset.num_obs();
    const int num_states = dataset.num_states();

    Matrix mean(n, num_states);
    Matrix deriv(n, num_states);
    for (int k = 0; k < num_states; ++k) {
        GpFitSettings fit_settings;
        fit_settings.restarts = config.eb_restarts;
        fit_settings.seed = mix_seed(config.seed, static_cast<std::uint64_t>(k));
        const KernelHyperparams hp = map_hyperparams_to_original(
            fit_hyperparameters(std_data.y.col(k), std_data.t, config.family, fit_settings),
            std_data.transform, k);
        const GPState gp = build_gp_state(config.family, hp, dataset.t);
        mean.col(k) = posterior(dataset.y.col(k), dataset.t, config.family, hp).mean;
        deriv.col(k) = gp.D * mean.col(k);
    }

    // least squares on the derivative mismatch with unit weights
    ObjectiveWithGrad fg = [&](const Vector &theta, Vector &grad) {
        grad = Vector::Zero(theta.size());
        double value = 0.0;
        try {
            for (int i = 0; i < n; ++i) {
                const Vector xi = mean.row(i).transpose();
                const Vector r = system.f(xi, theta) - deriv.row(i).transpose();
                value += r.squaredNorm();
                grad += 2.0 * system.jac_theta(xi, theta).transpose() * r;
            }
        } catch (const DomainError &) {
            return std::numeric_limits<double>::infinity();
        }
        return value;
    };

    const Bounds bounds = Bounds::unbounded(system.param_count);
    Vector best;
    double best_value = std::numeric_limits<double>::infinity();
    for (int r = 0; r < 5; ++r) {
        Rng rng(mix_seed(config.seed, 0x9000u + static_cast<std::uint64_t>(r)));
        Vector theta0(system.param_count);
        for (int p = 0; p < system.param_count; ++p) theta0[p] = rng.uniform(0.0, 1.0);
        const OptimizerReport report = minimize(fg, theta0, bounds, config.optimizer);
        if (report.value < best_value) {
            best_value = report.value;
            best = report.x;
        }
    }
    return best;
}

double quantile(std::vector<double> values, double q) {
    values.erase(std::remove_if(values.begin(), values.end(),
                                [](double v) { return !std::isfinite(v); }),
                 values.end());
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::string experiment_csv_header(int num_states, int num_params) {
    std::ostringstream os;
    os << "system,noise_mode,noise_value,seed,trmse_total";
    for (int k = 1; k <= num_states; ++k) os << ",trmse_s" << k;
    os << ",state_rmse_odin,state_rmse_gpr";
    for (int k = 1; k <= num_states; ++k) os << ",gamma_" << k;
    for (int p = 1; p <= num_params; ++p) os << ",theta_" << p;
    os << ",runtime_seconds";
    return os.str();
}

std::string experiment_csv_row(const ExperimentRecord &record) {
    std::ostringstream os;
    os << record.system << ',' << record.noise_mode << ',' << format_double(record.noise_value)
       << ',' << record.seed << ',' << format_double(record.trmse_total);
    for (Eigen::Index k = 0; k < record.trmse_per_state.size(); ++k) {
        os << ',' << format_double(record.trmse_per_state[k]);
    }
    os << ',' << format_double(record.state_rmse_odin) << ','
       << format_double(record.state_rmse_gpr);
    for (Eigen::Index k = 0; k < record.gamma.size(); ++k) {
        os << ',' << format_double(record.gamma[k]);
    }
    for (Eigen::Index p = 0; p < record.theta.size(); ++p) {
        os << ',' << format_double(record.theta[p]);
    }
    os << ',' << format_double(record.runtime_seconds);
    return os.str();
}

std::vector<ExperimentRecord> run_parameter_inference(const ODESystem &system,
                                                      const NoiseSpec &noise,
                                                      const RunSettings &settings) {
    return parallel_map<ExperimentRecord>(settings.reps, settings.threads, [&](int rep) {
        const std::uint64_t seed = settings.master_seed + static_cast<std::uint64_t>(rep);
        ExperimentRecord record;
        record.system = system.name;
        record.noise_mode = noise.mode == NoiseMode::AbsoluteSigma ? "absolute-sigma" : "snr";
        record.noise_value = noise.value;
        record.seed = seed;
        try {
            const TimeSeriesDataset dataset = generate_dataset(system, noise, seed);
            OdinConfig config = settings.config;
            config.seed = seed;
            const OdinResult result = fit(dataset, system, config);

            const TrajectoryRmse trmse =
                trajectory_rmse(result.theta, system, *dataset.true_states, *dataset.true_x0,
                                dataset.t, settings.conventional_rmse);
            record.trmse_total = trmse.total;
            record.trmse_per_state = trmse.per_state;
            record.failed = trmse.integration_failed;
            record.state_rmse_odin = stacked_rmse(result.states, *dataset.true_states);
            record.state_rmse_gpr = stacked_rmse(gp_baseline(dataset, config),
                                                 *dataset.true_states);
            record.gamma = result.gamma;
            record.theta = result.theta;
            record.runtime_seconds = result.runtime_seconds;
        } catch (const std::exception &) {
            record.failed = true;
            record.trmse_total = std::numeric_limits<double>::infinity();
            record.trmse_per_state =
                Vector::Constant(system.state_dim, std::numeric_limits<double>::infinity());
            record.gamma = Vector::Zero(system.state_dim);
            record.theta = Vector::Zero(system.param_count);
        }
        return record;
    });
}

std::vector<ModelSelectionRow> run_model_selection(const NoiseSpec &noise,
                                                   const RunSettings &settings) {
    const ODESystem truth_system = lotka_volterra();
    const std::vector<std::pair<int, int>> candidates{{1, 1}, {0, 1}, {1, 0}, {0, 0}};

    struct RepResult {
        std::vector<Vector> gamma;  // per candidate
    };
    const auto reps = parallel_map<RepResult>(settings.reps, settings.threads, [&](int rep) {
        const std::uint64_t seed = settings.master_seed + static_cast<std::uint64_t>(rep);
        const TimeSeriesDataset dataset = generate_dataset(truth_system, noise, seed);
        RepResult out;
        for (const auto &[i, j] : candidates) {
            const ODESystem candidate = lv_misspecified(i, j);
            OdinConfig config = settings.config;
            config.seed = seed;
            out.gamma.push_back(fit(dataset, candidate, config).gamma);
        }
        return out;
    });

    std::vector<ModelSelectionRow> rows;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        ModelSelectionRow row;
        row.model = "M" + std::to_string(candidates[c].first) +
                    std::to_string(candidates[c].second);
        row.gamma_median.resize(truth_system.state_dim);
        row.gamma_std.resize(truth_system.state_dim);
        for (int k = 0; k < truth_system.state_dim; ++k) {
            std::vector<double> values;
            values.reserve(reps.size());
            for (const auto &rep : reps) values.push_back(rep.gamma[c][k]);
            row.gamma_median[k] = quantile(values, 0.5);
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            row.gamma_std[k] = std::sqrt(var / static_cast<double>(values.size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ScalingResult run_scaling(const std::vector<int> &dims, const RunSettings &settings) {
    ScalingResult result;
    for (int dim : dims) {
        const ODESystem system = lorenz96(dim);
        const NoiseSpec noise{system.noise_low.mode, system.noise_low.value};
        // runtimes are the measurement; run repetitions sequentially
        std::vector<double> seconds;
        for (int rep = 0; rep < settings.reps; ++rep) {
            const std::uint64_t seed = settings.master_seed + static_cast<std::uint64_t>(rep);
            const TimeSeriesDataset dataset = generate_dataset(system, noise, seed);
            OdinConfig config = settings.config;
            config.seed = seed;
            seconds.push_back(fit(dataset, system, config).runtime_seconds);
        }
        ScalingRow row;
        row.dim = dim;
        for (double s : seconds) row.mean_seconds += s;
        row.mean_seconds /= static_cast<double>(seconds.size());
        double var = 0.0;
        for (double s : seconds) var += (s - row.mean_seconds) * (s - row.mean_seconds);
        row.std_seconds = std::sqrt(var / static_cast<double>(seconds.size()));
        result.rows.push_back(row);
    }

    // least squares of mean runtime against dimension
    const auto m = static_cast<double>(result.rows.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (const auto &row : result.rows) {
        const double x = row.dim, y = row.mean_seconds;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    const double denom = m * sxx - sx * sx;
    if (denom > 0.0 && m >= 2) {
        result.slope = (m * sxy - sx * sy) / denom;
        result.intercept = (sy - result.slope * sx) / m;
        double ss_res = 0.0, ss_tot = 0.0;
        const double y_mean = sy / m;
        for (const auto &row : result.rows) {
            const double pred = result.slope * row.dim + result.intercept;
            ss_res += (row.mean_seconds - pred) * (row.mean_seconds - pred);
            ss_tot += (row.mean_seconds - y_mean) * (row.mean_seconds - y_mean);
        }
        result.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    }
    return result;
}

std::vector<StateInferenceRow> run_state_inference(const ODESystem &system, const NoiseSpec &noise,
                                                   const RunSettings &settings) {
    return parallel_map<StateInferenceRow>(settings.reps, settings.threads, [&](int rep) {
        const std::uint64_t seed = settings.master_seed + static_cast<std::uint64_t>(rep);
        const TimeSeriesDataset dataset = generate_dataset(system, noise, seed);
        OdinConfig config = settings.config;
        config.seed = seed;

        StateInferenceRow row;
        row.seed = seed;
        const OdinResult result = fit(dataset, system, config);
        const Matrix baseline = gp_baseline(dataset, config);
        row.rmse_odin = state_rmse(result.states, *dataset.true_states);
        row.rmse_gpr = state_rmse(baseline, *dataset.true_states);
        row.total_odin = stacked_rmse(result.states, *dataset.true_states);
        row.total_gpr = stacked_rmse(baseline, *dataset.true_states);
        return row;
    });
}

void write_dataset_csv(std::ostream &out, const TimeSeriesDataset &dataset) {
    out << "t";
    for (int k = 1; k <= dataset.num_states(); ++k) out << ",y" << k;
    out << "\n";
    for (int i = 0; i < dataset.num_obs(); ++i) {
        out << format_double(dataset.t[i]);
        for (int k = 0; k < dataset.num_states(); ++k) {
            out << ',' << format_double(dataset.y(i, k));
        }
        out << "\n";
    }
}

TimeSeriesDataset read_dataset_csv(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset CSV");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw std::runtime_error("ragged dataset CSV");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().size() < 2) throw std::runtime_error("dataset CSV too small");

    TimeSeriesDataset dataset;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto k = static_cast<Eigen::Index>(rows.front().size() - 1);
    dataset.t.resize(n);
    dataset.y.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        dataset.t[i] = rows[static_cast<std::size_t>(i)][0];
        for (Eigen::Index j = 0; j < k; ++j) {
            dataset.y(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + 1];
        }
    }
    check_grid(dataset.t);
    return dataset;
}

std::string result_to_json(const OdinResult &result, const std::string &system_name,
                           const std::string &manifest) {
    nlohmann::json j;
    j["theta"] = std::vector<double>(result.theta.data(), result.theta.data() + result.theta.size());
    j["gamma"] = std::vector<double>(result.gamma.data(), result.gamma.data() + result.gamma.size());
    std::vector<double> states;
    states.reserve(static_cast<std::size_t>(result.states.size()));
    for (Eigen::Index i = 0; i < result.states.rows(); ++i) {
        for (Eigen::Index k = 0; k < result.states.cols(); ++k) {
            states.push_back(result.states(i, k));
        }
    }
    j["states"] = states;
    nlohmann::json hyper = nlohmann::json::array();
    for (const auto &hp : result.hyperparams) {
        hyper.push_back({{"amplitude", hp.amplitude},
                         {"lengthscale", hp.lengthscale},
                         {"sigma", hp.noise_sigma}});
    }
    j["hyperparams"] = hyper;
    j["risk"] = result.risk;
    j["seed"] = result.seed;
    j["runtime_seconds"] = result.runtime_seconds;
    j["manifest"] = manifest;
    j["system"] = system_name;
    return j.dump(2);
}

}  // namespace odin
