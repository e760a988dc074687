// Command-line front end: run, summarize, theory, bounds, dataset.

#include "cnnucb/bounds.hpp"
#include "cnnucb/config.hpp"
#include "cnnucb/datasets.hpp"
#include "cnnucb/errors.hpp"
#include "cnnucb/experiment.hpp"
#include "cnnucb/theory_lab.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

using namespace cnnucb;

namespace {

ArmShape shape_for(const ExperimentConfig& cfg) {
    ArmShape s;
    switch (cfg.dataset) {
    case DatasetKind::mnist:
    case DatasetKind::notmnist: s = {10, 784, 28, 28}; break;
    case DatasetKind::cifar10: s = {30, 1024, 32, 32}; break;
    case DatasetKind::synthetic: s = {1, cfg.synthetic_dim, 0, 0}; break;
    }
    return s;
}

int cmd_bounds(const std::string& config_path, std::size_t t, std::size_t T) {
    const auto cfg = load_config(config_path);
    const auto s = shape_for(cfg);
    const auto topo = s.height > 0 ? NetTopology::grid(cfg.cnn_layers, cfg.cnn_channels,
                                                       cfg.cnn_kernel, s.rows, s.height, s.width,
                                                       cfg.activation)
                                   : NetTopology::line(cfg.cnn_layers, cfg.cnn_channels,
                                                       cfg.cnn_kernel, s.rows, s.cols,
                                                       cfg.activation);
    const auto report = theory_bounds(topo, cfg.explore, t, cfg.k_schedule(t), T ? T : t,
                                      cfg.lambda);
    std::cout << std::setprecision(10);
    for (const auto& [label, value] : report.fields()) std::cout << label << ": " << value << '\n';
    return 0;
}

int cmd_theta_star(std::size_t t, std::uint64_t seed) {
    // Random instance with d = 500 parameters.
    const auto topo = NetTopology::line(1, 10, 3, 1, 47);
    const auto params0 = init_params(topo, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<ArmContext> arms;
    Vector f(static_cast<Eigen::Index>(t));
    for (std::size_t i = 0; i < t; ++i) {
        Matrix x(1, topo.pixels());
        for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = normal(rng);
        arms.push_back(x / x.norm());
        f[Eigen::Index(i)] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    const auto ts = construct_theta_star(arms, f, params0, topo);
    std::cout << std::setprecision(12) << "d: " << topo.param_count() << '\n'
              << "t: " << t << '\n'
              << "residual: " << ts.residual << '\n'
              << "norm_sq: " << ts.norm_sq << '\n'
              << "displacement_sq: " << ts.displacement.squaredNorm() << '\n'
              << "lambda_1: " << ts.lambda_1 << '\n'
              << "norm_sq_upper: " << f.squaredNorm() / ts.lambda_1 << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"CNN-UCB contextual bandit: experiments, diagnostics and bound calculator"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    auto* run = app.add_subcommand("run", "Run the bandit experiment described by a config file");
    run->add_option("--config", config_path, "Config file")->required();
    run->add_option("--out", out_dir, "Output directory")->required();

    std::vector<std::string> summary_inputs;
    std::string summary_out;
    auto* summarize_cmd = app.add_subcommand("summarize", "Mean and std of cumulative regret");
    summarize_cmd->add_option("files", summary_inputs, "rounds.csv files")->required();
    summarize_cmd->add_option("--out", summary_out, "Summary CSV (default: stdout)");

    auto* theory = app.add_subcommand("theory", "Finite-width checks of the analysis");
    theory->require_subcommand(1);
    std::vector<int> widths{8, 32, 128};
    std::size_t sweep_rounds = 50, sweep_k = 50, layers = 2, patch = 3, pixels = 16;
    std::uint64_t seed = 1;
    SweepOptions sweep_opt;
    double sweep_eta = 0.001;
    std::string sweep_out;
    auto* sweep = theory->add_subcommand("sweep", "Drift statistics over network widths");
    sweep->add_option("--widths", widths, "Widths, strictly increasing")->delimiter(',');
    sweep->add_option("--rounds", sweep_rounds, "Training observations");
    sweep->add_option("--k", sweep_k, "Gradient steps");
    sweep->add_option("--eta", sweep_eta, "Step size; 0 for 1/(m lambda + 1) per width");
    sweep->add_option("--layers", layers, "Convolutional layers");
    sweep->add_option("--patch", patch, "Patch length");
    sweep->add_option("--pixels", pixels, "Arm length");
    sweep->add_option("--probes", sweep_opt.probes, "Probe arms");
    sweep->add_option("--replicates", sweep_opt.replicates, "Initializations per width");
    sweep->add_option("--seed", seed, "Seed");
    sweep->add_option("--out", sweep_out, "CSV file (default: stdout)");

    std::size_t theta_t = 10;
    auto* theta_star = theory->add_subcommand("theta-star", "Build theta* on a random d = 500 instance");
    theta_star->add_option("--t", theta_t, "Number of arms");
    theta_star->add_option("--seed", seed, "Seed");

    std::size_t bound_t = 1, bound_T = 0;
    auto* bounds = app.add_subcommand("bounds", "Print every theoretical bound term");
    bounds->add_option("--config", config_path, "Config file")->required();
    bounds->add_option("--t", bound_t, "Round t")->required();
    bounds->add_option("--T", bound_T, "Horizon T (default t)");

    std::vector<std::string> dataset_paths;
    auto* dataset = app.add_subcommand("dataset", "Dataset utilities");
    dataset->require_subcommand(1);
    auto* check = dataset->add_subcommand("check", "Validate magic numbers and record counts");
    check->add_option("paths", dataset_paths, "IDX or CIFAR-10 files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e, std::cerr, std::cerr);
        std::cerr << app.help();
        return 1;
    }

    try {
        if (*run) {
            const auto cfg = load_config(config_path);
            const auto out = run_experiment(cfg, out_dir);
            std::cout << out.rounds_csv.string() << '\n';
        } else if (*summarize_cmd) {
            std::vector<std::filesystem::path> paths(summary_inputs.begin(), summary_inputs.end());
            const auto s = summarize(paths);
            if (summary_out.empty()) {
                s.write_csv(std::cout);
            } else {
                std::ofstream out(summary_out);
                s.write_csv(out);
            }
            s.write_final_table(std::cerr);
        } else if (*sweep) {
            sweep_opt.eta = sweep_eta > 0 ? std::optional<double>(sweep_eta) : std::nullopt;
            const auto base = NetTopology::line(int(layers), widths.empty() ? 1 : widths.front(),
                                                int(patch), 1, int(pixels));
            const auto rep = width_sweep(base, widths, sweep_rounds, sweep_k, seed, sweep_opt);
            if (sweep_out.empty()) {
                rep.write_csv(std::cout);
            } else {
                std::ofstream out(sweep_out);
                rep.write_csv(out);
            }
        } else if (*theta_star) {
            return cmd_theta_star(theta_t, seed);
        } else if (*bounds) {
            return cmd_bounds(config_path, bound_t, bound_T);
        } else if (*check) {
            for (const auto& p : dataset_paths) {
                const auto info = inspect_dataset_file(p);
                std::cout << p << ": " << info.kind << " N=" << info.records;
                if (!info.dims.empty()) {
                    std::cout << " dims=";
                    for (std::size_t i = 0; i < info.dims.size(); ++i)
                        std::cout << (i ? "x" : "") << info.dims[i];
                }
                std::cout << '\n';
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
