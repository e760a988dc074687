#include "cnnucb/bounds.hpp"
#include "cnnucb/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cnnucb;

namespace {

// Straight transcription of the bound, one term at a time.
struct Transcribed {
    double w, psi, a1, a2, a3, psi2, psi3;
};

Transcribed transcribe(double L, double m, double q, double p, double mu, double t, double lambda,
                       double C0, double C1, double C2) {
    Transcribed o{};
    o.w = 2 * t * std::sqrt(2.0) * std::pow(mu, L) * std::exp(C1 * (L - 1) * std::sqrt(q) + C2) *
          (std::pow(C1 * mu, L) + 1) / C0;
    o.psi = mu * o.w * (std::pow(2 * mu * C1 * std::sqrt(q), L) - 1) /
            (m * (2 * mu * C1 * std::sqrt(q) - 1));
    const double aL = std::pow(C1 * mu, L);
    o.a1 = t * std::sqrt(2 * q * (L + 1)) * o.psi * (aL + 2);
    o.a2 = t * std::sqrt(L + 1) * std::sqrt(p) * std::pow(C1 * mu * std::sqrt(q), L) * std::sqrt(t) *
           (o.psi * (C2 + 1) + aL * C2 + std::sqrt(q) * o.w * ((L - 1) * aL + 1)) *
           std::pow(m, -1.5);
    o.a3 = lambda * std::sqrt(L + 1) * o.w / std::sqrt(m);
    const double lead = std::sqrt(L + 1) *
                        (std::sqrt(p) * std::pow(C1 * mu * std::sqrt(q), L) / m +
                         std::sqrt(q) * o.psi * (aL + 2));
    const double bracket =
        (o.a1 + o.a2 + o.a3) / (m * lambda) + std::sqrt(t / (m * lambda)) +
        t * (L + 1) / m *
            (2 * std::sqrt(p) * std::pow(C1 * mu * std::sqrt(q), L) / m +
             std::sqrt(q) * o.psi * (aL + 2)) *
            std::sqrt(q) * o.psi * (aL + 2);
    o.psi2 = lead * bracket;
    o.psi3 = (C2 * (o.psi + aL) +
              std::sqrt(q) * (1 + o.psi) * o.w * ((L - 1) * (o.psi + aL) + 1)) /
             std::sqrt(m);
    return o;
}

} // namespace

TEST_CASE("drift radius w at the reference point") {
    const auto topo = NetTopology::line(1, 7, 1, 1, 3);
    const auto r = theory_bounds(topo, ExploreConfig{}, 1, 0, 1, 1.0);
    CHECK(r.w == doctest::Approx(4.357).epsilon(1e-3));
    // same value for any m
    CHECK(theory_bounds(topo.with_channels(1000), ExploreConfig{}, 1, 0, 1, 1.0).w == r.w);
}

TEST_CASE("bound terms agree with a direct transcription") {
    ExploreConfig cfg;
    cfg.constants = {0.7, 1.2, 1.9};
    const auto topo = NetTopology::grid(3, 20, 4, 10, 28, 28);
    for (std::size_t t : {1u, 17u, 500u}) {
        const auto r = theory_bounds(topo, cfg, t, 3, 2000, 0.5);
        const auto o = transcribe(3, 20, 16, 784, 0.25, double(t), 0.5, 0.7, 1.2, 1.9);
        CHECK(r.w == doctest::Approx(o.w).epsilon(1e-13));
        CHECK(r.psi_lk == doctest::Approx(o.psi).epsilon(1e-13));
        CHECK(r.a_bar_1 == doctest::Approx(o.a1).epsilon(1e-13));
        CHECK(r.a_bar_2 == doctest::Approx(o.a2).epsilon(1e-13));
        CHECK(r.a_bar_3 == doctest::Approx(o.a3).epsilon(1e-13));
        CHECK(r.psi2 == doctest::Approx(o.psi2).epsilon(1e-12));
        CHECK(r.psi3 == doctest::Approx(o.psi3).epsilon(1e-12));
        CHECK(r.eta_max == doctest::Approx(1.0 / (20 * 0.5 + 1)));
    }
}

TEST_CASE("doubling m halves the hidden drift radius") {
    const auto topo = NetTopology::line(2, 16, 3, 1, 9);
    const auto a = theory_bounds(topo, ExploreConfig{}, 10, 0, 10, 1.0);
    const auto b = theory_bounds(topo.with_channels(32), ExploreConfig{}, 10, 0, 10, 1.0);
    CHECK(b.psi_lk == a.psi_lk / 2);
}

TEST_CASE("geometric sum takes its limit L when 2 mu C1 sqrt(q) = 1") {
    // sigmoid mu = 1/4, q = 2, C1 = sqrt(2)
    ExploreConfig cfg;
    cfg.constants.c1 = std::sqrt(2.0);
    const auto topo = NetTopology::line(3, 5, 2, 1, 4);
    const auto r = theory_bounds(topo, cfg, 5, 0, 5, 1.0);
    CHECK(r.psi_lk == doctest::Approx(0.25 * r.w * 3 / 5).epsilon(1e-12));
}

TEST_CASE("every reported term is finite and non-negative") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> small(1, 4), width(1, 64);
    std::uniform_real_distribution<double> c(1.01, 1.99), lam(0.1, 5.0);
    for (int i = 0; i < 200; ++i) {
        ExploreConfig cfg;
        cfg.constants = {lam(rng), c(rng), c(rng)};
        const auto topo = (i % 2) ? NetTopology::line(small(rng), width(rng), small(rng), small(rng), 12)
                                  : NetTopology::grid(small(rng), width(rng), 2, small(rng), 5, 6,
                                                      Activation::softplus);
        const auto r = theory_bounds(topo, cfg, std::size_t(width(rng)), 1, 100, lam(rng), 3.0, 0.1);
        for (const auto& [name, v] : r.fields()) {
            INFO(name);
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("regret bound closed form") {
    // d_bar = 0 leaves 2 sqrt(1) (sqrt(2 log(1/delta) + 1) + sqrt(lambda) S) + 2
    const double v = regret_bound(0.0, 100, 1.0, 0.1, 1.0);
    CHECK(v == doctest::Approx(2 * (std::sqrt(2 * std::log(10.0) + 1) + 1) + 2));
    const auto topo = NetTopology::line(1, 4, 1, 1, 2);
    const auto r = theory_bounds(topo, ExploreConfig{}, 1, 0, 100, 1.0, 2.5);
    REQUIRE(r.regret_bound.has_value());
    const double info = 2.5 * std::log(101.0);
    CHECK(*r.regret_bound ==
          doctest::Approx(2 * std::sqrt(200 * info + 1) *
                              (std::sqrt(info + 2 * std::log(10.0) + 1) + 1) + 2));
    CHECK_FALSE(theory_bounds(topo, ExploreConfig{}, 1, 0, 100, 1.0).d_bar.has_value());
}

TEST_CASE("invalid bound inputs") {
    ExploreConfig cfg;
    cfg.constants.c1 = 2.0;
    CHECK_THROWS_AS(theory_bounds(NetTopology::line(1, 1, 1, 1, 1), cfg, 1, 0, 1, 1.0),
                    ConfigError);
    CHECK_THROWS_AS(theory_bounds(NetTopology::line(1, 1, 1, 1, 1), ExploreConfig{}, 1, 0, 1, 0.0),
                    ConfigError);
}
