#pragma once

#include "cnnucb/datasets.hpp"
#include "cnnucb/precision.hpp"
#include "cnnucb/topology.hpp"
#include "cnnucb/ucb.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cnnucb {

enum class Algorithm { cnn_ucb, fc_ucb, linucb, kernelucb, random };
Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm a);

enum class DatasetKind { mnist, notmnist, cifar10, synthetic };
DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind d);

// How the precision state is stored: `automatic` keeps the exact inverse up to
// full_precision_max_dim parameters and switches to the diagonal beyond.
enum class PrecisionChoice { automatic, full, diagonal };

// Defaults are the reference experimental settings unless noted.
struct ExperimentConfig {
    // [experiment]
    DatasetKind dataset = DatasetKind::mnist;
    SyntheticKind synthetic_kind = SyntheticKind::linear;
    std::filesystem::path data_dir; // empty: $CNNUCB_DATA_DIR, else ./data
    std::string images;             // relative to data_dir; empty: per-dataset default
    std::string labels;
    std::vector<std::string> cifar_batches;
    std::size_t rounds = 2000;
    std::size_t repeats = 5;
    std::uint64_t seed = 0;
    std::vector<Algorithm> algorithms{Algorithm::cnn_ucb, Algorithm::fc_ucb, Algorithm::linucb,
                                      Algorithm::kernelucb, Algorithm::random};
    bool timing = false;     // fill wallclock_ms; off keeps output byte-reproducible
    bool logdet_report = true;

    // [cnn]
    int cnn_layers = 3;
    int cnn_channels = 20;
    int cnn_kernel = 4; // k x k on image grids, k-wide on synthetic lines
    Activation activation = Activation::sigmoid;

    // [fc]
    int fc_depth = 4;
    int fc_width = 100;

    // [bandit]
    double lambda = 1.0;
    double eta = 0.001;
    ExploreConfig explore; // delta = 0.1, nu, s_bar, mode, bound constants
    PrecisionChoice precision = PrecisionChoice::automatic;
    std::size_t full_precision_max_dim = 8192;

    // [training]
    std::size_t k_threshold = 200; // k = t up to here
    std::size_t k_after = 100;     // k afterwards
    std::size_t k_max = 0;         // 0: no cap
    bool warm_start = false;       // continue from theta_{t-1} instead of theta0
    std::size_t batch_size = 0;    // 0: full history per step

    // [synthetic]
    int synthetic_arms = 4;
    int synthetic_dim = 8;
    double synthetic_noise = 0.05;

    // [linucb]
    std::optional<double> linucb_alpha; // unset: 1 + sqrt(ln(2/delta)/2)

    // [kernelucb]
    std::optional<double> kernel_gamma; // unset: median heuristic on the first rounds
    double kernel_beta = 1.0;
    std::size_t kernel_capacity = 500;

    // Throws ConfigError.
    void validate() const;

    std::filesystem::path resolved_data_dir() const;

    // Gradient steps after t observations.
    std::size_t k_schedule(std::size_t t) const;

    PrecisionMode precision_for(std::size_t d) const;
};

// Flat key/value file with [sections]; '#' and ';' start comments. Unknown
// sections or keys are a ConfigError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every field, in a form parse_config reads back to an equal config.
void write_config(std::ostream& out, const ExperimentConfig& cfg);

} // namespace cnnucb
