#include "cnnucb/baselines.hpp"

#include "cnnucb/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cnnucb {

double default_linucb_alpha(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    return 1.0 + std::sqrt(std::log(2.0 / delta) / 2.0);
}

LinUcbState linucb_new(std::size_t d, double lambda, double alpha, PrecisionMode mode) {
    if (!(alpha >= 0.0)) throw ConfigError("LinUCB alpha must be non-negative");
    return {PrecisionState(lambda, d, mode), alpha};
}

LinUcbScore linucb_score(const LinUcbState& state, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != state.dim())
        throw DimensionError("LinUCB context has length " + std::to_string(x.size()) +
                             ", state has " + std::to_string(state.dim()));
    // one solve gives both x^T A^{-1} b and x^T A^{-1} x
    const Vector v = state.precision.solve(x);
    LinUcbScore s;
    s.mean = v.dot(state.precision.b());
    s.width = std::sqrt(std::max(0.0, v.dot(x)));
    s.total = s.mean + state.alpha * s.width;
    return s;
}

std::size_t linucb_select(const LinUcbState& state, std::span<const Vector> contexts) {
    if (contexts.empty()) throw ConfigError("linucb_select: no arms to choose from");
    std::size_t best = 0;
    double best_total = linucb_score(state, contexts[0]).total;
    for (std::size_t i = 1; i < contexts.size(); ++i) {
        const double t = linucb_score(state, contexts[i]).total;
        if (t > best_total) {
            best = i;
            best_total = t;
        }
    }
    return best;
}

LinUcbState linucb_update(LinUcbState state, const Vector& x, double reward) {
    if (!std::isfinite(reward)) throw NumericError("non-finite reward");
    state.precision.absorb(x, reward);
    return state;
}

KernelUcbState::KernelUcbState(std::size_t input_dim, double gamma, double lambda, double beta,
                               std::size_t capacity)
    : dim_(input_dim), gamma_(gamma), lambda_(lambda), beta_(beta), capacity_(capacity) {
    if (input_dim == 0) throw ConfigError("kernel UCB input dimension must be at least 1");
    if (!(gamma > 0.0)) throw ConfigError("RBF gamma must be positive");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(beta >= 0.0)) throw ConfigError("kernel UCB beta must be non-negative");
    if (capacity == 0) throw ConfigError("kernel UCB capacity must be at least 1");
}

KernelUcbState::Entry KernelUcbState::compress(const Vector& x) {
    Entry e;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) {
            e.index.push_back(i);
            e.value.push_back(x[i]);
        }
    e.sq_norm = x.squaredNorm();
    return e;
}

double KernelUcbState::kernel_with(const Entry& e, const Vector& x, double x_sq_norm) const {
    double dot = 0.0;
    for (std::size_t k = 0; k < e.index.size(); ++k) dot += e.value[k] * x[e.index[k]];
    const double dist = std::max(0.0, e.sq_norm + x_sq_norm - 2.0 * dot);
    return std::exp(-gamma_ * dist);
}

double KernelUcbState::kernel(const Vector& a, const Vector& b) const {
    return std::exp(-gamma_ * (a - b).squaredNorm());
}

KernelUcbState::Posterior KernelUcbState::posterior(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != dim_)
        throw DimensionError("kernel UCB context has the wrong length");
    const double xx = x.squaredNorm();
    const auto n = static_cast<Eigen::Index>(dictionary_.size());
    Vector k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_with(dictionary_[std::size_t(i)], x, xx);
    Posterior p;
    if (n > 0) {
        p.mean = k.dot(alpha_);
        p.raw_width_sq = (1.0 - k.dot(kernel_inv_ * k)) / lambda_;
    } else {
        p.raw_width_sq = 1.0 / lambda_;
    }
    p.width = std::sqrt(std::max(0.0, p.raw_width_sq));
    p.total = p.mean + beta_ * p.width;
    return p;
}

void KernelUcbState::absorb(const Vector& x, double reward) {
    if (static_cast<std::size_t>(x.size()) != dim_)
        throw DimensionError("kernel UCB context has the wrong length");
    if (!x.allFinite() || !std::isfinite(reward)) throw NumericError("non-finite kernel UCB input");
    if (frozen()) return;

    const double xx = x.squaredNorm();
    const auto n = static_cast<Eigen::Index>(dictionary_.size());
    Vector k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_with(dictionary_[std::size_t(i)], x, xx);
    // Bordered inverse: Schur complement of the new diagonal entry.
    const Vector mk = kernel_inv_ * k;
    const double schur = 1.0 + lambda_ - k.dot(mk);
    if (!(schur > 1e-12 * lambda_))
        throw NumericError("kernel system became singular at dictionary size " +
                           std::to_string(n + 1) + "; increase lambda");
    Matrix next(n + 1, n + 1);
    next.topLeftCorner(n, n) = kernel_inv_ + mk * mk.transpose() / schur;
    next.col(n).head(n) = -mk / schur;
    next.row(n).head(n) = next.col(n).head(n).transpose();
    next(n, n) = 1.0 / schur;
    kernel_inv_ = std::move(next);

    dictionary_.push_back(compress(x));
    rewards_.push_back(reward);
    reward_vec_.conservativeResize(n + 1);
    reward_vec_[n] = reward;
    alpha_ = kernel_inv_ * reward_vec_;
}

std::size_t kernelucb_select(const KernelUcbState& state, std::span<const Vector> contexts) {
    if (contexts.empty()) throw ConfigError("kernelucb_select: no arms to choose from");
    std::size_t best = 0;
    double best_total = state.posterior(contexts[0]).total;
    for (std::size_t i = 1; i < contexts.size(); ++i) {
        const double t = state.posterior(contexts[i]).total;
        if (t > best_total) {
            best = i;
            best_total = t;
        }
    }
    return best;
}

double median_heuristic_gamma(std::span<const Vector> sample) {
    std::vector<double> d;
    for (std::size_t i = 0; i < sample.size(); ++i)
        for (std::size_t j = i + 1; j < sample.size(); ++j)
            d.push_back((sample[i] - sample[j]).squaredNorm());
    if (d.empty()) throw ConfigError("median heuristic needs at least two contexts");
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    if (!(*mid > 0.0)) throw NumericError("median pairwise distance is zero");
    return 1.0 / *mid;
}

std::size_t RandomPolicy::select(std::size_t n_arms) {
    if (n_arms == 0) throw ConfigError("random policy: no arms to choose from");
    std::uniform_int_distribution<std::size_t> pick(0, n_arms - 1);
    return pick(rng_);
}

} // namespace cnnucb
