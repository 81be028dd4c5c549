#include "odin/experiments.hpp"
#include "odin/odin.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace odin;

namespace {

TimeSeriesDataset lv_dataset(double sigma, std::uint64_t seed) {
    return generate_dataset(lotka_volterra(), NoiseSpec{NoiseMode::AbsoluteSigma, sigma}, seed);
}

OdinConfig quick_config() {
    OdinConfig config;
    config.eb_restarts = 4;
    config.theta_restarts = 1;
    config.theta_init_low = 0.5;
    config.theta_init_high = 3.0;
    config.seed = 11;
    return config;
}

bool hyperparams_equal(const std::vector<KernelHyperparams> &a,
                       const std::vector<KernelHyperparams> &b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].amplitude != b[k].amplitude || a[k].lengthscale != b[k].lengthscale ||
            a[k].noise_sigma != b[k].noise_sigma) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("odin");

TEST_CASE("reported risk is self-consistent at the returned point") {
    const TimeSeriesDataset data = lv_dataset(0.1, 5);
    const ODESystem sys = lotka_volterra();
    const OdinResult result = fit(data, sys, quick_config());
    const RiskContext ctx =
        build_risk_context(data.t, data.y, KernelFamily::RBF, result.hyperparams, sys);
    const double recomputed = risk_full(result.states, result.theta, result.gamma, ctx);
    CHECK(result.risk == doctest::Approx(recomputed).epsilon(1e-8));
}

TEST_CASE("optimization never increases the risk over the initialization") {
    const TimeSeriesDataset data = lv_dataset(0.1, 7);
    const ODESystem sys = lotka_volterra();
    OdinConfig config = quick_config();
    OdinConfig frozen = config;
    frozen.optimizer.max_iterations = 0;
    const OdinResult start = fit(data, sys, frozen);
    const OdinResult full = fit(data, sys, config);
    CHECK(hyperparams_equal(start.hyperparams, full.hyperparams));  // same step-1 outcome
    CHECK(full.risk <= start.risk + 1e-9 * (1.0 + std::abs(start.risk)));
}

TEST_CASE("results are reproducible for a fixed seed") {
    const TimeSeriesDataset data = lv_dataset(0.1, 9);
    const ODESystem sys = lotka_volterra();
    const OdinConfig config = quick_config();
    const OdinResult a = fit(data, sys, config);
    const OdinResult b = fit(data, sys, config);
    CHECK((a.states - b.states).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.theta - b.theta).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.gamma - b.gamma).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(a.risk == b.risk);
    CHECK(hyperparams_equal(a.hyperparams, b.hyperparams));
}

TEST_CASE("gp baseline equals the per-state posterior means") {
    const TimeSeriesDataset data = lv_dataset(0.1, 13);
    OdinConfig config = quick_config();
    const Matrix baseline = gp_baseline(data, config);

    Matrix y = data.y;
    const StandardizedData sd = standardize(data.t, y);
    for (int k = 0; k < data.num_states(); ++k) {
        GpFitSettings settings;
        settings.restarts = config.eb_restarts;
        settings.seed = mix_seed(config.seed, static_cast<std::uint64_t>(k));
        const KernelHyperparams hp_std =
            fit_hyperparameters(sd.y.col(k), sd.t, config.family, settings);
        const KernelHyperparams hp = map_hyperparams_to_original(hp_std, sd.transform, k);
        const Vector expected = posterior(data.y.col(k), data.t, config.family, hp).mean;
        for (Eigen::Index i = 0; i < data.num_obs(); ++i) {
            CHECK(baseline(i, k) == doctest::Approx(expected[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("near-noiseless data keeps the baseline near the observations") {
    const TimeSeriesDataset data = lv_dataset(1e-8, 17);
    const Matrix baseline = gp_baseline(data, quick_config());
    const Vector rmse = state_rmse(baseline, data.y);
    CHECK(rmse.maxCoeff() < 1e-2);
}

TEST_CASE("gamma reaches its lower bound on dense noiseless data") {
    const ODESystem sys = lotka_volterra();
    Vector grid(25);
    for (int i = 0; i < 25; ++i) grid[i] = 2.0 * i / 24.0;
    const TimeSeriesDataset data = generate_dataset(
        sys, sys.theta_true, sys.x0, grid, NoiseSpec{NoiseMode::AbsoluteSigma, 1e-6}, 19);
    OdinConfig config = quick_config();
    config.theta_restarts = 3;
    const OdinResult result = fit(data, sys, config);
    CHECK(result.gamma[0] == kGammaLowerBound);
    CHECK(result.gamma[1] == kGammaLowerBound);
    CHECK((result.theta - sys.theta_true).lpNorm<Eigen::Infinity>() < 0.1);
}

TEST_CASE("gamma never goes below the global lower bound") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const TimeSeriesDataset data = lv_dataset(0.1, seed);
        const OdinResult result = fit(data, lotka_volterra(), quick_config());
        CHECK(result.gamma.minCoeff() >= kGammaLowerBound);
    }
}

TEST_CASE("fixed gamma stays exactly at its configured value") {
    const TimeSeriesDataset data = lv_dataset(0.1, 29);
    OdinConfig config = quick_config();
    config.fixed_gamma = true;
    config.gamma_init = 0.37;
    const OdinResult result = fit(data, lotka_volterra(), config);
    CHECK(result.gamma[0] == 0.37);
    CHECK(result.gamma[1] == 0.37);
}

TEST_CASE("theta estimates are stable across initialization seeds") {
    const TimeSeriesDataset data = lv_dataset(0.1, 31);
    const ODESystem sys = lotka_volterra();
    std::vector<std::vector<double>> per_component(4);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        OdinConfig config = quick_config();
        config.seed = 1000 + seed;
        const OdinResult result = fit(data, sys, config);
        for (int p = 0; p < 4; ++p) per_component[static_cast<std::size_t>(p)].push_back(result.theta[p]);
    }
    for (int p = 0; p < 4; ++p) {
        auto &v = per_component[static_cast<std::size_t>(p)];
        const double med = quantile(v, 0.5);
        const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
        CHECK(iqr < 0.25 * std::abs(med));
    }
}

TEST_CASE("theta box constraints are respected") {
    const TimeSeriesDataset data = lv_dataset(0.1, 37);
    OdinConfig config = quick_config();
    config.theta_lower = Vector::Constant(4, 0.0);
    config.theta_upper = Vector::Constant(4, 1.5);  // true values 2 and 4 are outside
    const OdinResult result = fit(data, lotka_volterra(), config);
    CHECK(result.theta.minCoeff() >= 0.0);
    CHECK(result.theta.maxCoeff() <= 1.5);
}

TEST_SUITE_END();
