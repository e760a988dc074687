#pragma once

// Test-only oracles. Everything here is written independently of the library's
// evaluation paths: explicit index loops, dense linear algebra, finite differences.

#include "cnnucb/cnn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using cnnucb::Matrix;
using cnnucb::Vector;

// Source pixel for slot s of pixel j, written out from the padding rules.
inline int patch_source(const cnnucb::NetTopology& topo, int j, int s) {
    const int q = topo.patch;
    if (topo.spatial.kind == cnnucb::Spatial::Kind::line) {
        const int lo = (q % 2 == 1) ? -(q / 2) : -((q - 1) / 2);
        const int src = j + lo + s;
        return (src >= 0 && src < topo.pixels()) ? src : -1;
    }
    int k = 1;
    while (k * k < q) ++k;
    const int w = topo.spatial.width;
    const int h = topo.spatial.height;
    const int pad_before = (k - 1) / 2;
    const int r = j / w + s / k - pad_before;
    const int c = j % w + s % k - pad_before;
    return (r >= 0 && r < h && c >= 0 && c < w) ? r * w + c : -1;
}

inline double sigma(cnnucb::Activation a, double z) {
    if (a == cnnucb::Activation::sigmoid) return 1.0 / (1.0 + std::exp(-z));
    return std::log(1.0 + std::exp(z));
}

// f(x; theta) by plain loops over the recursion.
inline double naive_output(const Matrix& x, const Vector& theta, const cnnucb::NetTopology& topo) {
    const int m = topo.channels, q = topo.patch, p = topo.pixels(), L = topo.layers;
    const double scale = 1.0 / std::sqrt(double(q) * m);
    std::vector<std::vector<double>> h(x.rows(), std::vector<double>(p));
    for (int c = 0; c < x.rows(); ++c)
        for (int j = 0; j < p; ++j) h[c][j] = x(c, j);
    std::size_t pos = 0;
    for (int l = 0; l < L; ++l) {
        const int in = static_cast<int>(h.size());
        // W is m x (q*in), column-major: W(r, col) = theta[pos + col*m + r]
        std::vector<std::vector<double>> next(m, std::vector<double>(p, 0.0));
        for (int r = 0; r < m; ++r)
            for (int j = 0; j < p; ++j) {
                double acc = 0.0;
                for (int c = 0; c < in; ++c)
                    for (int s = 0; s < q; ++s) {
                        const int src = patch_source(topo, j, s);
                        if (src < 0) continue;
                        acc += theta[pos + static_cast<std::size_t>(c * q + s) * m + r] * h[c][src];
                    }
                next[r][j] = scale * sigma(topo.activation, acc);
            }
        pos += static_cast<std::size_t>(m) * q * in;
        h = std::move(next);
    }
    double f = 0.0;
    for (int j = 0; j < p; ++j)
        for (int r = 0; r < m; ++r) f += theta[pos + static_cast<std::size_t>(j) * m + r] * h[r][j];
    return f / std::sqrt(double(m));
}

// Central differences of a scalar function of a vector.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& at,
                                 double eps) {
    Vector g(at.size());
    Vector probe = at;
    for (Eigen::Index i = 0; i < at.size(); ++i) {
        probe[i] = at[i] + eps;
        const double up = f(probe);
        probe[i] = at[i] - eps;
        const double down = f(probe);
        probe[i] = at[i];
        g[i] = (up - down) / (2 * eps);
    }
    return g;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_relative_error(const Vector& a, const Vector& b, double floor = 1e-6) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

inline Matrix random_unit_arm(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix x(rows, cols);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    return x / x.norm();
}

inline Vector random_vector(Eigen::Index d, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = n(rng);
    return v;
}

// log det via eigenvalues of a symmetric PSD matrix: sum log(1 + ev / lambda).
inline double logdet_identity_plus_eigen(const Matrix& gram, double lambda) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    double s = 0.0;
    for (Eigen::Index i = 0; i < gram.rows(); ++i) s += std::log1p(es.eigenvalues()[i] / lambda);
    return s;
}

} // namespace oracle
