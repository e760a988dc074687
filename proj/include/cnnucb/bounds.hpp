#pragma once

#include "cnnucb/topology.hpp"
#include "cnnucb/ucb.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cnnucb {

// Closed-form terms of the confidence and regret bounds at a given (t, m, lambda).
// Report-only, except psi2 and psi3 which theoretical-mode scoring adds to
// every total.
struct BoundReport {
    double w = 0.0;
    double psi_lk = 0.0; // the hidden-layer drift radius Psi_{L,(k')}
    double a_bar_1 = 0.0;
    double a_bar_2 = 0.0;
    double a_bar_3 = 0.0;
    double psi2 = 0.0;
    double psi3 = 0.0;
    double m_required = 0.0;
    double eta_max = 0.0;
    double gram_drift = 0.0;
    // Width-level drift bounds used as sweep reference columns.
    double gradient_drift_bound = 0.0;
    double kernel_drift_bound = 0.0;
    double linearization_bound = 0.0;
    // Need a Gram matrix; absent otherwise.
    std::optional<double> lambda_1;
    std::optional<double> d_bar;
    std::optional<double> regret_bound;

    // (label, value) in a fixed order; absent optionals are skipped.
    std::vector<std::pair<std::string, double>> fields() const;
};

// t: observations so far; k: gradient steps (not used by any closed form, kept
// for the report); T: horizon used by gram_drift and the regret bound.
BoundReport theory_bounds(const NetTopology& topo, const ExploreConfig& cfg, std::size_t t,
                          std::size_t k, std::size_t T, double lambda,
                          std::optional<double> d_bar = std::nullopt,
                          std::optional<double> lambda_1 = std::nullopt);

// 2 sqrt(2 T d log(1 + T/lambda) + 1) (sqrt(d log(1 + T/lambda) + 2 log(1/delta) + 1)
//   + sqrt(lambda) s_bar) + 2
double regret_bound(double d_bar, std::size_t T, double lambda, double delta, double s_bar);

} // namespace cnnucb
