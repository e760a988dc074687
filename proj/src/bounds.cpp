#include "cnnucb/bounds.hpp"

#include "cnnucb/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cnnucb {

namespace {

struct Shape {
    double L, q, p, m, mu;
};

// w with the h-norm bound (C1 mu)^L + 1.
double drift_w(const Shape& s, const BoundConstants& c, double t) {
    const double aL = std::pow(c.c1 * s.mu, s.L);
    return 2.0 * t * std::sqrt(2.0) * std::pow(s.mu, s.L) *
           std::exp(c.c1 * (s.L - 1.0) * std::sqrt(s.q) + c.c2) * (aL + 1.0) / c.c0;
}

// mu w (r^L - 1) / (m (r - 1)), r = 2 mu C1 sqrt(q); the geometric sum is L at r = 1.
double psi_lk(const Shape& s, const BoundConstants& c, double w) {
    const double r = 2.0 * s.mu * c.c1 * std::sqrt(s.q);
    const double geometric =
        std::abs(r - 1.0) < 1e-12 ? s.L : (std::pow(r, s.L) - 1.0) / (r - 1.0);
    return s.mu * w * geometric / s.m;
}

} // namespace

double regret_bound(double d_bar, std::size_t T, double lambda, double delta, double s_bar) {
    const double Td = static_cast<double>(T);
    const double info = d_bar * std::log1p(Td / lambda);
    return 2.0 * std::sqrt(2.0 * Td * info + 1.0) *
               (std::sqrt(info + 2.0 * std::log(1.0 / delta) + 1.0) + std::sqrt(lambda) * s_bar) +
           2.0;
}

BoundReport theory_bounds(const NetTopology& topo, const ExploreConfig& cfg, std::size_t t,
                          std::size_t k, std::size_t T, double lambda,
                          std::optional<double> d_bar, std::optional<double> lambda_1) {
    (void)k;
    topo.validate();
    cfg.validate();
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");

    const BoundConstants& c = cfg.constants;
    const Shape s{double(topo.layers), double(topo.patch), double(topo.pixels()),
                  double(topo.channels), topo.mu()};
    const double td = static_cast<double>(t);
    const double aL = std::pow(c.c1 * s.mu, s.L);
    const double sq = std::sqrt(s.q);
    // sqrt(p) (C1 mu sqrt(q))^L / m: the initial-gradient scale
    const double g0 = std::sqrt(s.p) * std::pow(c.c1 * s.mu * sq, s.L) / s.m;

    BoundReport r;
    r.w = drift_w(s, c, td);
    r.psi_lk = psi_lk(s, c, r.w);
    const double drift = sq * r.psi_lk * (aL + 2.0);
    const double lin_core = r.psi_lk * (c.c2 + 1.0) + aL * c.c2 + sq * r.w * ((s.L - 1.0) * aL + 1.0);

    r.a_bar_1 = td * std::sqrt(2.0 * s.q * (s.L + 1.0)) * r.psi_lk * (aL + 2.0);
    r.a_bar_2 = td * std::sqrt(s.L + 1.0) * std::sqrt(s.p) * std::pow(c.c1 * s.mu * sq, s.L) *
                std::sqrt(td) * lin_core * std::pow(s.m, -1.5);
    r.a_bar_3 = lambda * std::sqrt(s.L + 1.0) * r.w / std::sqrt(s.m);

    const double kernel_t = td * (s.L + 1.0) / s.m * (2.0 * g0 + drift) * drift;
    r.psi2 = std::sqrt(s.L + 1.0) * (g0 + drift) *
             ((r.a_bar_1 + r.a_bar_2 + r.a_bar_3) / (s.m * lambda) +
              std::sqrt(td / (s.m * lambda)) + kernel_t);
    r.psi3 = (c.c2 * (r.psi_lk + aL) +
              sq * (1.0 + r.psi_lk) * r.w * ((s.L - 1.0) * (r.psi_lk + aL) + 1.0)) /
             std::sqrt(s.m);

    // O(.) and Omega(.) read with unit constants.
    const double t_eff = std::max(td, 1.0);
    r.m_required = std::max({std::pow(td, 4) * aL * std::exp(c.c1 * s.L * sq + c.c2) /
                                 (lambda * c.c0),
                             std::log(s.L * t_eff / cfg.delta), 0.0});
    r.eta_max = 1.0 / (s.m * lambda + 1.0);

    r.gradient_drift_bound = std::sqrt(s.q * (s.L + 1.0)) * r.psi_lk * (aL + 2.0);
    r.kernel_drift_bound = (s.L + 1.0) * (2.0 * g0 + drift) * drift;
    r.linearization_bound = lin_core / std::sqrt(s.m);

    // Gram drift over the horizon, with w evaluated at t = T.
    const double Td = static_cast<double>(T);
    const double psi_T = psi_lk(s, c, drift_w(s, c, Td));
    const double drift_T = sq * psi_T * (aL + 2.0);
    r.gram_drift = Td * (s.L + 1.0) / s.m * (2.0 * g0 + drift_T) * drift_T;

    r.lambda_1 = lambda_1;
    if (d_bar) {
        r.d_bar = d_bar;
        r.regret_bound = regret_bound(*d_bar, T, lambda, cfg.delta, cfg.s_bar);
    }
    return r;
}

std::vector<std::pair<std::string, double>> BoundReport::fields() const {
    std::vector<std::pair<std::string, double>> out = {
        {"w", w},
        {"psi_lk", psi_lk},
        {"a_bar_1", a_bar_1},
        {"a_bar_2", a_bar_2},
        {"a_bar_3", a_bar_3},
        {"psi2", psi2},
        {"psi3", psi3},
        {"m_required", m_required},
        {"eta_max", eta_max},
        {"gram_drift", gram_drift},
        {"gradient_drift_bound", gradient_drift_bound},
        {"kernel_drift_bound", kernel_drift_bound},
        {"linearization_bound", linearization_bound},
    };
    if (lambda_1) out.emplace_back("lambda_1", *lambda_1);
    if (d_bar) out.emplace_back("d_bar", *d_bar);
    if (regret_bound) out.emplace_back("regret_bound", *regret_bound);
    return out;
}

} // namespace cnnucb
