#pragma once

#include "cnnucb/cnn.hpp"
#include "cnnucb/precision.hpp"

#include <span>
#include <string>
#include <vector>

namespace cnnucb {

enum class ExploreMode { theoretical, practical };

ExploreMode parse_explore_mode(const std::string& name);
std::string to_string(ExploreMode mode);

// Existence constants of the confidence bound. Only the bound calculator reads them.
struct BoundConstants {
    double c0 = 1.0;
    double c1 = 1.5;
    double c2 = 1.5;
};

struct ExploreConfig {
    ExploreMode mode = ExploreMode::practical;
    double delta = 0.1;
    double s_bar = 1.0;
    double nu = 1.0; // practical mode only
    BoundConstants constants;

    // Throws ConfigError: delta in (0,1), s_bar > 0, nu >= 0, c0 > 0, c1 and c2 in (1,2).
    void validate() const;
};

struct UcbScore {
    double mean = 0.0;
    double width = 0.0;
    double psi1 = 0.0;
    double psi2 = 0.0;
    double psi3 = 0.0;
    // psi1 in theoretical mode, nu in practical mode.
    double width_scale = 0.0;
    double total = 0.0;

    // mean + width_scale * width: the part of `total` that differs between arms.
    double arm_value() const { return mean + width_scale * width; }
};

// sqrt(logdet_ratio - 2 ln delta) + sqrt(lambda) * s_bar
double psi1(const PrecisionState& state, const ExploreConfig& cfg);

// Arm-independent extra terms added to every total of a round.
struct RoundOffsets {
    double psi2 = 0.0;
    double psi3 = 0.0;
};

// Score from an already computed mean and gradient. `psi_1` is psi1(state, cfg).
UcbScore make_score(double mean, const Vector& gradient, int m, const PrecisionState& state,
                    const ExploreConfig& cfg, double psi_1, const RoundOffsets& offsets);

// Offsets for one CNN round: psi2/psi3 from the bound calculator in theoretical
// mode, zeros in practical mode. t is the number of absorbed observations.
RoundOffsets round_offsets(const NetTopology& topo, const ExploreConfig& cfg, std::size_t t,
                           double lambda);

// mean = f(x; params), width = ||g(x; params)/sqrt(m)||_{A^{-1}}.
UcbScore score_arm(const ArmContext& x, const CnnParams& params, const CnnParams& params0,
                   const NetTopology& topo, const PrecisionState& state,
                   const ExploreConfig& cfg);

// All arms of a round at once. Gradients are returned column-wise when
// `gradients` is non-null, so the chosen column can feed update_state.
std::vector<UcbScore> score_arms(std::span<const ArmContext> arms, const CnnParams& params,
                                 const NetTopology& topo, const PrecisionState& state,
                                 const ExploreConfig& cfg, Matrix* gradients = nullptr);

// Index of the largest arm_value(); ties go to the lowest index. Arm-independent
// offsets (psi2, psi3) are excluded from the comparison, so adding a common
// constant to every total cannot change the result. Throws ConfigError on empty input.
std::size_t select_arm(std::span<const UcbScore> scores);

// Plain argmax over raw values with the same tie rule.
std::size_t select_arm(std::span<const double> totals);

// A^{-1} b
Vector ridge_theta_hat(const PrecisionState& state);

// <g(x1; theta0), g(x2; theta0)>
double cntk_kernel(const ArmContext& x1, const ArmContext& x2, const CnnParams& params0,
                   const NetTopology& topo);

// <g(x; theta0), theta - theta0>
double cntk_predict(const ArmContext& x, const CnnParams& params, const CnnParams& params0,
                    const NetTopology& topo);

// log det(I + K/lambda) through a Cholesky factor. Throws NumericError when K
// has an eigenvalue below -1e-8.
double logdet_identity_plus(const Matrix& gram, double lambda);

// log det(I + K/lambda) / log(1 + T/lambda) with T = gram.rows().
double effective_dimension(const Matrix& gram, double lambda);

// Gram of g(x_i; theta0)/sqrt(m) over the arms, then effective_dimension.
double effective_dimension(std::span<const ArmContext> arms, const CnnParams& params0,
                           const NetTopology& topo, double lambda);

// K_ij = <g_i, g_j> / m for gradients stored column-wise.
Matrix normalized_gram(const Matrix& gradients, int m);

} // namespace cnnucb
