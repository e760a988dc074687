#pragma once

#include "cnnucb/bounds.hpp"
#include "cnnucb/cnn.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace cnnucb {

struct ThetaStar {
    Vector displacement; // theta* - theta0
    double residual = 0.0; // ||G^T displacement - f*||
    double norm_sq = 0.0;  // f*^T (G^T G)^{-1} f*, through a Cholesky solve
    double lambda_1 = 0.0; // smallest eigenvalue of G^T G
};

// Minimum-norm theta* - theta0 = U Sigma^{-1} V^T f* from the thin SVD of the
// d x t gradient matrix G. Throws RankError when a singular value falls below
// 1e-10 times the largest, DimensionError when t > d or sizes disagree.
ThetaStar theta_star_from_gradients(const Matrix& G, const Vector& f_star);

// G holds g(x_i; theta0) column-wise.
ThetaStar construct_theta_star(std::span<const ArmContext> arms, const Vector& f_star,
                               const CnnParams& params0, const NetTopology& topo);

struct SweepStatistic {
    std::string name;
    double median = 0.0;
    double max = 0.0;
    std::optional<double> bound;
};

struct WidthResult {
    int width = 0;
    double eta = 0.0;
    bool diverged = false;
    std::string diverged_reason;
    std::vector<SweepStatistic> stats;

    // Throws ConfigError for an unknown name.
    const SweepStatistic& get(const std::string& name) const;
};

struct SweepReport {
    std::vector<int> widths;
    std::vector<WidthResult> results;

    // width,statistic,median,max,bound; an empty bound field means none is displayed.
    void write_csv(std::ostream& out) const;
};

struct SweepOptions {
    std::size_t probes = 10;
    // Independent initializations theta0 per width (seeds seed, seed+1, ...);
    // medians run over every (probe, initialization) pair.
    std::size_t replicates = 5;
    double lambda = 1.0;
    // Step size shared by every width; when unset each width uses the
    // largest admissible step 1/(m lambda + 1).
    std::optional<double> eta = 0.001;
    ExploreConfig explore; // bound constants
};

// For each width m and each replicate: theta0 from its seed, the same train_rounds synthetic linear
// observations and the same probes for every width, k full-batch gradient steps
// from theta0, then drift statistics over the probes. A diverged width is
// flagged and the sweep goes on.
SweepReport width_sweep(const NetTopology& base, const std::vector<int>& widths,
                        std::size_t train_rounds, std::size_t k, std::uint64_t seed,
                        const SweepOptions& options = {});

struct LogdetReport {
    double logdet_ratio = 0.0; // as tracked by the run
    double d_bar = 0.0;
    double d_bar_eigen = 0.0; // same quantity from eigenvalues
    double bound_rhs = 1.0;   // d_bar log(1 + T/lambda) + 1
    std::size_t rounds = 0;

    bool holds() const { return logdet_ratio <= bound_rhs; }
};

// init_gradients: g(x_t; theta0) of the played arms, column-wise. Throws
// ConfigError when rounds > 0 and no gradients were stored.
LogdetReport logdet_report(const Matrix& init_gradients, int m, double lambda,
                           double logdet_ratio, std::size_t rounds);

} // namespace cnnucb
