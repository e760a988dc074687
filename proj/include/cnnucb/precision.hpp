#pragma once

#include "cnnucb/topology.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace cnnucb {

enum class PrecisionMode {
    full,     // exact A^{-1} via Sherman-Morrison, O(d^2) per update
    diagonal, // diag(A) only; an approximation for very large d
};

PrecisionMode parse_precision_mode(const std::string& name);
std::string to_string(PrecisionMode mode);

// Regularized design state A_t = lambda I + sum u u^T, b_t = sum r u.
// Updates are value-semantic: update_state takes the state by value and
// returns the successor, so a moved-in state is updated without copying.
class PrecisionState {
public:
    PrecisionState() = default;
    PrecisionState(double lambda, std::size_t d, PrecisionMode mode = PrecisionMode::full);

    double lambda() const { return lambda_; }
    std::size_t dim() const { return d_; }
    PrecisionMode mode() const { return mode_; }
    std::size_t rounds() const { return t_; }
    // log det(A_t) - d log(lambda); in diagonal mode, of diag(A_t).
    double logdet_ratio() const { return logdet_ratio_; }
    const Vector& b() const { return b_; }

    // Full mode only.
    const Matrix& a_inv() const;
    // Diagonal mode: the diagonal of A (not of its inverse).
    const Vector& a_diagonal() const;

    // u^T A^{-1} u. Zero entries of u are skipped, so block-sparse inputs cost
    // O(nnz^2) in full mode.
    double quadratic_form(const Vector& u) const;
    // A^{-1} u
    Vector solve(const Vector& u) const;
    // Ridge estimate A^{-1} b.
    Vector theta_hat() const;

    // Rank-one absorb of (u, reward). Throws NumericError on non-finite u.
    void absorb(const Vector& u, double reward);

private:
    double lambda_ = 1.0;
    std::size_t d_ = 0;
    PrecisionMode mode_ = PrecisionMode::full;
    std::size_t t_ = 0;
    double logdet_ratio_ = 0.0;
    Matrix a_inv_;   // full
    Vector a_diag_;  // diagonal
    Vector b_;
};

// A_0 = lambda I. Throws ConfigError for lambda <= 0 or d == 0.
PrecisionState new_state(double lambda, std::size_t d, PrecisionMode mode = PrecisionMode::full);

// Absorbs u = g / sqrt(m) with its reward.
PrecisionState update_state(PrecisionState state, const Vector& g, int m, double reward);

// Indices of the nonzero entries of u.
std::vector<Eigen::Index> nonzero_indices(const Vector& u);

} // namespace cnnucb
