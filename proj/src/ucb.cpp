#include "cnnucb/ucb.hpp"

#include "cnnucb/bounds.hpp"
#include "cnnucb/errors.hpp"
#include "cnnucb/kernels.hpp"

#include <cmath>

namespace cnnucb {

ExploreMode parse_explore_mode(const std::string& name) {
    if (name == "theoretical") return ExploreMode::theoretical;
    if (name == "practical") return ExploreMode::practical;
    throw ConfigError("unknown exploration mode '" + name + "' (expected theoretical or practical)");
}

std::string to_string(ExploreMode mode) {
    return mode == ExploreMode::theoretical ? "theoretical" : "practical";
}

void ExploreConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (!(s_bar > 0.0) || !std::isfinite(s_bar)) throw ConfigError("s_bar must be positive");
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw ConfigError("nu must be non-negative");
    if (!(constants.c0 > 0.0)) throw ConfigError("C0 must be positive");
    if (!(constants.c1 > 1.0 && constants.c1 < 2.0)) throw ConfigError("C1 must lie in (1, 2)");
    if (!(constants.c2 > 1.0 && constants.c2 < 2.0)) throw ConfigError("C2 must lie in (1, 2)");
}

double psi1(const PrecisionState& state, const ExploreConfig& cfg) {
    return std::sqrt(state.logdet_ratio() - 2.0 * std::log(cfg.delta)) +
           std::sqrt(state.lambda()) * cfg.s_bar;
}

UcbScore make_score(double mean, const Vector& gradient, int m, const PrecisionState& state,
                    const ExploreConfig& cfg, double psi_1, const RoundOffsets& offsets) {
    if (!std::isfinite(mean) || !gradient.allFinite())
        throw NumericError("non-finite model output or gradient while scoring");
    const Vector u = gradient / std::sqrt(static_cast<double>(m));
    UcbScore s;
    s.mean = mean;
    s.width = std::sqrt(std::max(0.0, state.quadratic_form(u)));
    s.psi1 = psi_1;
    if (cfg.mode == ExploreMode::theoretical) {
        s.psi2 = offsets.psi2;
        s.psi3 = offsets.psi3;
        s.width_scale = psi_1;
    } else {
        s.width_scale = cfg.nu;
    }
    s.total = s.arm_value() + s.psi2 + s.psi3;
    return s;
}

RoundOffsets round_offsets(const NetTopology& topo, const ExploreConfig& cfg, std::size_t t,
                           double lambda) {
    if (cfg.mode != ExploreMode::theoretical) return {};
    const auto report = theory_bounds(topo, cfg, t, 0, std::max<std::size_t>(t, 1), lambda);
    return {report.psi2, report.psi3};
}

UcbScore score_arm(const ArmContext& x, const CnnParams& params, const CnnParams& params0,
                   const NetTopology& topo, const PrecisionState& state,
                   const ExploreConfig& cfg) {
    if (!params.same_shape(params0)) throw DimensionError("params and params0 differ in shape");
    if (state.dim() != params.size())
        throw DimensionError("precision dimension does not match the parameter count");
    Vector g;
    const double f = network_gradient(x, params, topo, g);
    return make_score(f, g, topo.channels, state, cfg, psi1(state, cfg),
                      round_offsets(topo, cfg, state.rounds(), state.lambda()));
}

std::vector<UcbScore> score_arms(std::span<const ArmContext> arms, const CnnParams& params,
                                 const NetTopology& topo, const PrecisionState& state,
                                 const ExploreConfig& cfg, Matrix* gradients) {
    if (state.dim() != params.size())
        throw DimensionError("precision dimension does not match the parameter count");
    Vector f;
    Matrix g;
    kernels::outputs_and_gradients(params, topo, arms, f, g);
    const double p1 = psi1(state, cfg);
    const auto offsets = round_offsets(topo, cfg, state.rounds(), state.lambda());
    std::vector<UcbScore> scores;
    scores.reserve(arms.size());
    for (Eigen::Index i = 0; i < g.cols(); ++i)
        scores.push_back(make_score(f[i], g.col(i), topo.channels, state, cfg, p1, offsets));
    if (gradients) *gradients = std::move(g);
    return scores;
}

std::size_t select_arm(std::span<const UcbScore> scores) {
    if (scores.empty()) throw ConfigError("select_arm: no arms to choose from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i].arm_value() > scores[best].arm_value()) best = i;
    return best;
}

std::size_t select_arm(std::span<const double> totals) {
    if (totals.empty()) throw ConfigError("select_arm: no arms to choose from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < totals.size(); ++i)
        if (totals[i] > totals[best]) best = i;
    return best;
}

Vector ridge_theta_hat(const PrecisionState& state) { return state.theta_hat(); }

double cntk_kernel(const ArmContext& x1, const ArmContext& x2, const CnnParams& params0,
                   const NetTopology& topo) {
    Vector g1, g2;
    network_gradient(x1, params0, topo, g1);
    network_gradient(x2, params0, topo, g2);
    return g1.dot(g2);
}

double cntk_predict(const ArmContext& x, const CnnParams& params, const CnnParams& params0,
                    const NetTopology& topo) {
    if (!params.same_shape(params0)) throw DimensionError("params and params0 differ in shape");
    Vector g;
    network_gradient(x, params0, topo, g);
    return g.dot(params.flat() - params0.flat());
}

Matrix normalized_gram(const Matrix& gradients, int m) {
    Matrix k = gradients.transpose() * gradients;
    k /= static_cast<double>(m);
    return k;
}

double logdet_identity_plus(const Matrix& gram, double lambda) {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (gram.rows() != gram.cols()) throw DimensionError("Gram matrix must be square");
    const Eigen::Index n = gram.rows();
    if (n == 0) return 0.0;
    if (!gram.allFinite()) throw NumericError("non-finite Gram matrix");
    // K + 1e-8 I must factor, otherwise K has an eigenvalue below -1e-8.
    Matrix shifted = gram;
    shifted.diagonal().array() += 1e-8;
    if (Eigen::LLT<Matrix>(shifted).info() != Eigen::Success)
        throw NumericError("Gram matrix is not positive semidefinite");
    Matrix a = gram / lambda;
    a.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("I + K/lambda is not positive definite");
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double effective_dimension(const Matrix& gram, double lambda) {
    if (gram.rows() < 1) throw ConfigError("effective dimension needs at least one arm");
    const double T = static_cast<double>(gram.rows());
    return logdet_identity_plus(gram, lambda) / std::log1p(T / lambda);
}

double effective_dimension(std::span<const ArmContext> arms, const CnnParams& params0,
                           const NetTopology& topo, double lambda) {
    if (arms.empty()) throw ConfigError("effective dimension needs at least one arm");
    Vector f;
    Matrix g;
    kernels::outputs_and_gradients(params0, topo, arms, f, g);
    return effective_dimension(normalized_gram(g, topo.channels), lambda);
}

} // namespace cnnucb
