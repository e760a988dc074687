#include "cnnucb/precision.hpp"

#include "cnnucb/errors.hpp"

#include <cmath>

namespace cnnucb {

PrecisionMode parse_precision_mode(const std::string& name) {
    if (name == "full") return PrecisionMode::full;
    if (name == "diagonal") return PrecisionMode::diagonal;
    throw ConfigError("unknown precision mode '" + name + "' (expected full or diagonal)");
}

std::string to_string(PrecisionMode mode) {
    return mode == PrecisionMode::full ? "full" : "diagonal";
}

std::vector<Eigen::Index> nonzero_indices(const Vector& u) {
    std::vector<Eigen::Index> nz;
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (u[i] != 0.0) nz.push_back(i);
    return nz;
}

PrecisionState::PrecisionState(double lambda, std::size_t d, PrecisionMode mode)
    : lambda_(lambda), d_(d), mode_(mode) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ConfigError("lambda must be positive and finite");
    if (d == 0) throw ConfigError("precision dimension must be at least 1");
    const auto n = static_cast<Eigen::Index>(d);
    if (mode == PrecisionMode::full)
        a_inv_ = Matrix::Identity(n, n) / lambda;
    else
        a_diag_ = Vector::Constant(n, lambda);
    b_ = Vector::Zero(n);
}

const Matrix& PrecisionState::a_inv() const {
    if (mode_ != PrecisionMode::full) throw ConfigError("a_inv() needs full precision mode");
    return a_inv_;
}

const Vector& PrecisionState::a_diagonal() const {
    if (mode_ != PrecisionMode::diagonal)
        throw ConfigError("a_diagonal() needs diagonal precision mode");
    return a_diag_;
}

namespace {

void check_length(const Vector& u, std::size_t d) {
    if (static_cast<std::size_t>(u.size()) != d)
        throw DimensionError("vector length " + std::to_string(u.size()) +
                             " does not match precision dimension " + std::to_string(d));
}

} // namespace

double PrecisionState::quadratic_form(const Vector& u) const {
    check_length(u, d_);
    if (mode_ == PrecisionMode::diagonal) return (u.array().square() / a_diag_.array()).sum();
    const auto nz = nonzero_indices(u);
    if (nz.size() * 2 > d_) return u.dot(a_inv_ * u);
    double s = 0.0;
    for (Eigen::Index j : nz) {
        double col = 0.0;
        for (Eigen::Index i : nz) col += a_inv_(i, j) * u[i];
        s += col * u[j];
    }
    return s;
}

Vector PrecisionState::solve(const Vector& u) const {
    check_length(u, d_);
    if (mode_ == PrecisionMode::diagonal) return (u.array() / a_diag_.array()).matrix();
    const auto nz = nonzero_indices(u);
    if (nz.size() * 2 > d_) return a_inv_ * u;
    Vector v = Vector::Zero(a_inv_.rows());
    for (Eigen::Index k : nz) v.noalias() += u[k] * a_inv_.col(k);
    return v;
}

Vector PrecisionState::theta_hat() const {
    if (mode_ == PrecisionMode::diagonal) return (b_.array() / a_diag_.array()).matrix();
    return a_inv_ * b_;
}

void PrecisionState::absorb(const Vector& u, double reward) {
    check_length(u, d_);
    if (!u.allFinite()) throw NumericError("non-finite gradient passed to the precision update");

    if (mode_ == PrecisionMode::diagonal) {
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            if (u[i] == 0.0) continue;
            const double sq = u[i] * u[i];
            logdet_ratio_ += std::log1p(sq / a_diag_[i]);
            a_diag_[i] += sq;
        }
    } else {
        // Sherman-Morrison with w = A^{-1}u / sqrt(1 + u^T A^{-1} u), so
        // A^{-1} -= w w^T, entry by entry; w_i * w_j == w_j * w_i keeps the
        // result exactly symmetric.
        const Vector v = solve(u);
        double s = 0.0;
        for (Eigen::Index i : nonzero_indices(u)) s += u[i] * v[i];
        const Vector w = v / std::sqrt(1.0 + s);
        const Eigen::Index n = a_inv_.rows();
#pragma omp parallel for schedule(static)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double wj = w[j];
            if (wj == 0.0) continue;
            double* col = a_inv_.col(j).data();
            for (Eigen::Index i = 0; i < n; ++i) col[i] -= w[i] * wj;
        }
        logdet_ratio_ += std::log1p(s);
    }
    b_.noalias() += reward * u;
    ++t_;
}

PrecisionState new_state(double lambda, std::size_t d, PrecisionMode mode) {
    return PrecisionState(lambda, d, mode);
}

PrecisionState update_state(PrecisionState state, const Vector& g, int m, double reward) {
    if (m < 1) throw ConfigError("width m must be at least 1");
    state.absorb(g / std::sqrt(static_cast<double>(m)), reward);
    return state;
}

} // namespace cnnucb
