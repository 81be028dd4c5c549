#include "odin/experiments.hpp"
#include "odin/odin.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace odin;

namespace {

Vector linspace(double lo, double hi, int n) {
    Vector t(n);
    for (int i = 0; i < n; ++i) t[i] = lo + (hi - lo) * i / (n - 1);
    return t;
}

void bm_cov_matrices(benchmark::State &state) {
    const int n = static_cast<int>(state.range(0));
    const Vector t = linspace(0.0, 10.0, n);
    const KernelHyperparams hp{1.0, 0.8, 0.1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_cov_matrices(KernelFamily::RBF, hp, t));
    }
}
BENCHMARK(bm_cov_matrices)->Arg(50)->Arg(200);

void bm_gp_state(benchmark::State &state) {
    const int n = static_cast<int>(state.range(0));
    const Vector t = linspace(0.0, 10.0, n);
    const KernelHyperparams hp{1.0, 0.8, 0.1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_gp_state(KernelFamily::RBF, hp, t));
    }
}
BENCHMARK(bm_gp_state)->Arg(50)->Arg(200);

void bm_marginal_likelihood(benchmark::State &state) {
    const int n = static_cast<int>(state.range(0));
    const Vector t = linspace(0.0, 10.0, n);
    Vector y = t.array().sin();
    const KernelHyperparams hp{1.0, 0.8, 0.1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(log_marginal_likelihood(y, t, KernelFamily::RBF, hp));
    }
}
BENCHMARK(bm_marginal_likelihood)->Arg(50)->Arg(200);

struct RiskFixture {
    std::shared_ptr<const RiskContext> ctx;
    Vector z;

    RiskFixture() {
        const ODESystem sys = lotka_volterra();
        const TimeSeriesDataset data =
            generate_dataset(sys, NoiseSpec{NoiseMode::AbsoluteSigma, 0.1}, 1);
        std::vector<KernelHyperparams> hp(2, KernelHyperparams{1.0, 0.4, 0.1});
        ctx = std::make_shared<const RiskContext>(
            build_risk_context(data.t, data.y, KernelFamily::RBF, hp, sys));
        RiskEvaluator eval(ctx);
        z = eval.pack(data.y, sys.theta_true, Vector::Constant(2, 0.1));
    }
};

void bm_risk_and_gradient(benchmark::State &state) {
    RiskFixture fixture;
    RiskEvaluator eval(fixture.ctx);
    Vector grad;
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval(fixture.z, grad));
        benchmark::DoNotOptimize(grad);
    }
}
BENCHMARK(bm_risk_and_gradient);

void bm_full_lv_fit(benchmark::State &state) {
    const ODESystem sys = lotka_volterra();
    const TimeSeriesDataset data =
        generate_dataset(sys, NoiseSpec{NoiseMode::AbsoluteSigma, 0.1}, 1);
    OdinConfig config;
    config.eb_restarts = 4;
    config.theta_init_low = 0.5;
    config.theta_init_high = 3.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit(data, sys, config));
    }
}
BENCHMARK(bm_full_lv_fit)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
