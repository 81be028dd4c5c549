#include "odin/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadArgs = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

odin::NoiseSpec make_noise(double noise_std, double snr, bool has_std, bool has_snr) {
    if (has_std == has_snr) {
        throw CLI::ValidationError("exactly one of --noise-std / --snr is required");
    }
    if (has_std) return {odin::NoiseMode::AbsoluteSigma, noise_std};
    return {odin::NoiseMode::Snr, snr};
}

odin::OdinConfig load_config(const std::string &path) {
    odin::OdinConfig config;
    if (path.empty()) return config;
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    if (j.contains("kernel")) {
        const std::string kernel = j["kernel"];
        if (kernel == "rbf") {
            config.family = odin::KernelFamily::RBF;
        } else if (kernel == "matern52") {
            config.family = odin::KernelFamily::Matern52;
        } else {
            throw CLI::ValidationError("unknown kernel: " + kernel);
        }
    }
    if (j.contains("eb_restarts")) config.eb_restarts = j["eb_restarts"];
    if (j.contains("theta_restarts")) config.theta_restarts = j["theta_restarts"];
    if (j.contains("seed")) config.seed = j["seed"];
    if (j.contains("gamma_init")) config.gamma_init = j["gamma_init"];
    if (j.contains("fixed_gamma")) config.fixed_gamma = j["fixed_gamma"];
    if (j.contains("theta_init_low")) config.theta_init_low = j["theta_init_low"];
    if (j.contains("theta_init_high")) config.theta_init_high = j["theta_init_high"];
    if (j.contains("max_iterations")) config.optimizer.max_iterations = j["max_iterations"];
    return config;
}

std::ofstream open_output(const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot open output: " + path);
    return out;
}

std::string run_manifest(const std::string &command, const odin::ODESystem &system,
                         const odin::NoiseSpec &noise, int reps, std::uint64_t seed) {
    std::ostringstream os;
    os << "command=" << command << " system=" << system.name << " noise_mode="
       << (noise.mode == odin::NoiseMode::AbsoluteSigma ? "absolute-sigma" : "snr")
       << " noise_value=" << noise.value << " reps=" << reps << " seed=" << seed
       << " snr_convention=sigma_k=std(x_k)/sqrt(SNR)";
    return os.str();
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"ODE-informed regression: joint state and parameter inference"};
    app.require_subcommand(1);

    std::string system_name = "lv", out_path, data_path, config_path;
    double noise_std = 0.0, snr = 0.0;
    std::uint64_t seed = 0;
    int reps = 20;
    int threads = 0;
    bool conventional = false;
    std::string dims_csv = "25,50,100,200";

    auto add_noise_opts = [&](CLI::App *cmd) {
        auto *o1 = cmd->add_option("--noise-std", noise_std, "absolute noise std");
        auto *o2 = cmd->add_option("--snr", snr, "signal-to-noise ratio");
        return std::make_pair(o1, o2);
    };

    auto *simulate = app.add_subcommand("simulate", "generate a noisy dataset CSV");
    simulate->add_option("--system", system_name)->required();
    auto sim_noise = add_noise_opts(simulate);
    simulate->add_option("--seed", seed);
    simulate->add_option("--out", out_path)->required();

    auto *fit_cmd = app.add_subcommand("fit", "fit one dataset, emit result JSON");
    fit_cmd->add_option("--data", data_path)->required();
    fit_cmd->add_option("--system", system_name)->required();
    fit_cmd->add_option("--config", config_path, "JSON config");
    fit_cmd->add_option("--out", out_path)->required();

    auto *infer = app.add_subcommand("infer-params", "parameter-inference study, CSV records");
    infer->add_option("--system", system_name)->required();
    auto infer_noise = add_noise_opts(infer);
    infer->add_option("--reps", reps);
    infer->add_option("--seed", seed);
    infer->add_option("--threads", threads);
    infer->add_flag("--conventional-rmse", conventional, "divide by sqrt(N) instead of N");
    infer->add_option("--out", out_path)->required();

    auto *select = app.add_subcommand("model-select", "gamma table over the LV candidates");
    select->add_option("--noise-std", noise_std)->required();
    select->add_option("--reps", reps);
    select->add_option("--seed", seed);
    select->add_option("--threads", threads);
    select->add_option("--out", out_path)->required();

    auto *scaling = app.add_subcommand("scaling", "runtime vs state dimension");
    scaling->add_option("--dims", dims_csv, "comma-separated dimensions");
    scaling->add_option("--reps", reps);
    scaling->add_option("--seed", seed);
    scaling->add_option("--out", out_path)->required();

    auto *state_infer = app.add_subcommand("state-infer", "state RMSE comparison vs plain GPR");
    state_infer->add_option("--system", system_name)->required();
    auto si_noise = add_noise_opts(state_infer);
    state_infer->add_option("--reps", reps);
    state_infer->add_option("--seed", seed);
    state_infer->add_option("--threads", threads);
    state_infer->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitBadArgs;
    }

    try {
        if (*simulate) {
            const odin::ODESystem system = odin::lookup_system(system_name);
            const odin::NoiseSpec noise =
                make_noise(noise_std, snr, sim_noise.first->count() > 0,
                           sim_noise.second->count() > 0);
            const odin::TimeSeriesDataset dataset = odin::generate_dataset(system, noise, seed);
            auto out = open_output(out_path);
            odin::write_dataset_csv(out, dataset);
        } else if (*fit_cmd) {
            const odin::ODESystem system = odin::lookup_system(system_name);
            std::ifstream in(data_path);
            if (!in) throw std::ios_base::failure("cannot open data: " + data_path);
            const odin::TimeSeriesDataset dataset = odin::read_dataset_csv(in);
            const odin::OdinConfig config = load_config(config_path);
            const odin::OdinResult result = odin::fit(dataset, system, config);
            std::ostringstream manifest;
            manifest << "command=fit system=" << system.name << " data=" << data_path
                     << " seed=" << config.seed;
            auto out = open_output(out_path);
            out << odin::result_to_json(result, system.name, manifest.str()) << "\n";
        } else if (*infer) {
            const odin::ODESystem system = odin::lookup_system(system_name);
            const odin::NoiseSpec noise =
                make_noise(noise_std, snr, infer_noise.first->count() > 0,
                           infer_noise.second->count() > 0);
            odin::RunSettings settings;
            settings.reps = reps;
            settings.master_seed = seed;
            settings.threads = threads;
            settings.conventional_rmse = conventional;
            const auto records = odin::run_parameter_inference(system, noise, settings);
            auto out = open_output(out_path);
            out << "# " << run_manifest("infer-params", system, noise, reps, seed) << "\n";
            out << odin::experiment_csv_header(system.state_dim, system.param_count) << "\n";
            int sentinels = 0;
            std::vector<double> totals;
            for (const auto &record : records) {
                out << odin::experiment_csv_row(record) << "\n";
                if (record.failed) ++sentinels;
                totals.push_back(record.trmse_total);
            }
            std::cout << "trmse_total quantiles: 25%=" << odin::quantile(totals, 0.25)
                      << " 50%=" << odin::quantile(totals, 0.5)
                      << " 75%=" << odin::quantile(totals, 0.75)
                      << " (sentinel rows: " << sentinels << ")\n";
        } else if (*select) {
            odin::RunSettings settings;
            settings.reps = reps;
            settings.master_seed = seed;
            settings.threads = threads;
            const odin::NoiseSpec noise{odin::NoiseMode::AbsoluteSigma, noise_std};
            const auto rows = odin::run_model_selection(noise, settings);
            auto out = open_output(out_path);
            out << "model,gamma1_median,gamma1_std,gamma2_median,gamma2_std\n";
            for (const auto &row : rows) {
                out << row.model << ',' << row.gamma_median[0] << ',' << row.gamma_std[0] << ','
                    << row.gamma_median[1] << ',' << row.gamma_std[1] << "\n";
            }
        } else if (*scaling) {
            std::vector<int> dims;
            std::stringstream ss(dims_csv);
            std::string item;
            while (std::getline(ss, item, ',')) dims.push_back(std::stoi(item));
            odin::RunSettings settings;
            settings.reps = reps;
            settings.master_seed = seed;
            const odin::ScalingResult result = odin::run_scaling(dims, settings);
            auto out = open_output(out_path);
            out << "dim,mean_seconds,std_seconds\n";
            for (const auto &row : result.rows) {
                out << row.dim << ',' << row.mean_seconds << ',' << row.std_seconds << "\n";
            }
            out << "# slope=" << result.slope << " intercept=" << result.intercept
                << " r_squared=" << result.r_squared << "\n";
        } else if (*state_infer) {
            const odin::ODESystem system = odin::lookup_system(system_name);
            const odin::NoiseSpec noise = make_noise(noise_std, snr, si_noise.first->count() > 0,
                                                     si_noise.second->count() > 0);
            odin::RunSettings settings;
            settings.reps = reps;
            settings.master_seed = seed;
            settings.threads = threads;
            const auto rows = odin::run_state_inference(system, noise, settings);
            auto out = open_output(out_path);
            out << "# " << run_manifest("state-infer", system, noise, reps, seed) << "\n";
            out << "seed,total_odin,total_gpr";
            for (int k = 1; k <= system.state_dim; ++k) out << ",odin_s" << k << ",gpr_s" << k;
            out << "\n";
            for (const auto &row : rows) {
                out << row.seed << ',' << row.total_odin << ',' << row.total_gpr;
                for (int k = 0; k < system.state_dim; ++k) {
                    out << ',' << row.rmse_odin[k] << ',' << row.rmse_gpr[k];
                }
                out << "\n";
            }
        }
    } catch (const CLI::ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadArgs;
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadArgs;
    } catch (const std::ios_base::failure &e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception &e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
