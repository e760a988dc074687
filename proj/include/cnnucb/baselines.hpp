#pragma once

#include "cnnucb/precision.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cnnucb {

// 1 + sqrt(ln(2/delta) / 2)
double default_linucb_alpha(double delta);

// Ridge regression on the raw flattened context; shares PrecisionState with the
// network-based engines (u = x).
struct LinUcbState {
    PrecisionState precision;
    double alpha = 1.0;

    std::size_t dim() const { return precision.dim(); }
};

LinUcbState linucb_new(std::size_t d, double lambda, double alpha,
                       PrecisionMode mode = PrecisionMode::full);

struct LinUcbScore {
    double mean = 0.0;  // x^T theta_hat
    double width = 0.0; // sqrt(x^T A^{-1} x)
    double total = 0.0;
};

LinUcbScore linucb_score(const LinUcbState& state, const Vector& x);

// argmax of x^T theta_hat + alpha sqrt(x^T A^{-1} x); ties to the lowest index.
std::size_t linucb_select(const LinUcbState& state, std::span<const Vector> contexts);

LinUcbState linucb_update(LinUcbState state, const Vector& x, double reward);

// Kernel ridge UCB with an RBF kernel over a dictionary of past contexts.
// Contexts are kept as (index, value) lists, which suits block-sparse arms.
class KernelUcbState {
public:
    static constexpr std::size_t kDefaultCapacity = 500;

    KernelUcbState() = default;
    KernelUcbState(std::size_t input_dim, double gamma, double lambda, double beta,
                   std::size_t capacity = kDefaultCapacity);

    std::size_t input_dim() const { return dim_; }
    double gamma() const { return gamma_; }
    double lambda() const { return lambda_; }
    double beta() const { return beta_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return rewards_.size(); }
    bool frozen() const { return size() >= capacity_; }
    // (K + lambda I)^{-1} over the dictionary.
    const Matrix& kernel_inv() const { return kernel_inv_; }
    const std::vector<double>& rewards() const { return rewards_; }

    // exp(-gamma ||a - b||^2)
    double kernel(const Vector& a, const Vector& b) const;

    struct Posterior {
        double mean = 0.0;
        double width = 0.0;
        double raw_width_sq = 0.0; // before clamping at 0
        double total = 0.0;
    };
    Posterior posterior(const Vector& x) const;

    // Adds (x, r) unless the dictionary is full. Throws NumericError if the
    // bordered system loses positive definiteness.
    void absorb(const Vector& x, double reward);

private:
    struct Entry {
        std::vector<Eigen::Index> index;
        std::vector<double> value;
        double sq_norm = 0.0;
    };
    static Entry compress(const Vector& x);
    double kernel_with(const Entry& e, const Vector& x, double x_sq_norm) const;

    std::size_t dim_ = 0;
    double gamma_ = 1.0;
    double lambda_ = 1.0;
    double beta_ = 1.0;
    std::size_t capacity_ = kDefaultCapacity;
    std::vector<Entry> dictionary_;
    std::vector<double> rewards_;
    Vector reward_vec_;
    Vector alpha_; // (K + lambda I)^{-1} r
    Matrix kernel_inv_;
};

// Returns the chosen index; the caller observes the reward and calls absorb.
std::size_t kernelucb_select(const KernelUcbState& state, std::span<const Vector> contexts);

// Select, then absorb the reward of the chosen arm given by `reward_of`.
template <class RewardFn>
std::pair<std::size_t, KernelUcbState> kernelucb_step(KernelUcbState state,
                                                      std::span<const Vector> contexts,
                                                      RewardFn&& reward_of) {
    const std::size_t pick = kernelucb_select(state, contexts);
    state.absorb(contexts[pick], reward_of(pick));
    return {pick, std::move(state)};
}

// 1 / median of the pairwise squared distances among `sample`.
double median_heuristic_gamma(std::span<const Vector> sample);

// Uniform choice with its own seeded generator.
class RandomPolicy {
public:
    explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
    std::size_t select(std::size_t n_arms);

private:
    std::mt19937_64 rng_;
};

} // namespace cnnucb
