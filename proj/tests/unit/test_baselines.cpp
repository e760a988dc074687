#include "cnnucb/baselines.hpp"
#include "cnnucb/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace cnnucb;

TEST_CASE("LinUCB alpha") {
    CHECK(default_linucb_alpha(0.1) == doctest::Approx(1.0 + std::sqrt(std::log(20.0) / 2)));
    CHECK_THROWS_AS(default_linucb_alpha(0.0), ConfigError);
}

TEST_CASE("LinUCB at t=0 picks the largest norm") {
    const auto s = linucb_new(3, 2.0, 1.5);
    const std::vector<Vector> arms = {Vector::Ones(3), 2 * Vector::Ones(3), Vector::Unit(3, 0)};
    CHECK(linucb_select(s, arms) == 1);
    CHECK(linucb_score(s, arms[0]).total == doctest::Approx(1.5 * std::sqrt(3.0) / std::sqrt(2.0)));
    CHECK_THROWS_AS(linucb_select(s, std::vector<Vector>{}), ConfigError);
    CHECK_THROWS_AS(linucb_score(s, Vector::Ones(4)), DimensionError);
}

TEST_CASE("LinUCB learns a noiseless two-arm problem") {
    std::mt19937_64 rng(31);
    const Vector a = oracle::random_vector(5, rng).normalized();
    std::vector<Vector> arms = {oracle::random_vector(5, rng).normalized(),
                                oracle::random_vector(5, rng).normalized()};
    const std::size_t better = a.dot(arms[0]) > a.dot(arms[1]) ? 0 : 1;
    auto s = linucb_new(5, 1.0, default_linucb_alpha(0.1));
    int hits = 0;
    for (int t = 0; t < 500; ++t) {
        const auto pick = linucb_select(s, arms);
        if (t >= 400 && pick == better) ++hits;
        s = linucb_update(std::move(s), arms[pick], a.dot(arms[pick]));
    }
    CHECK(hits >= 99);
}

TEST_CASE("LinUCB state against a dense ridge solve") {
    std::mt19937_64 rng(32);
    auto s = linucb_new(12, 0.5, 1.0);
    Matrix A = 0.5 * Matrix::Identity(12, 12);
    Vector b = Vector::Zero(12);
    for (int t = 0; t < 200; ++t) {
        const Vector x = oracle::random_vector(12, rng);
        const double r = std::sin(t);
        s = linucb_update(std::move(s), x, r);
        A += x * x.transpose();
        b += r * x;
    }
    const Vector direct = A.ldlt().solve(b);
    CHECK((s.precision.theta_hat() - direct).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((s.precision.a_inv() - s.precision.a_inv().transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.precision.a_inv() - A.inverse()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("LinUCB and the network engines share one precision update") {
    std::mt19937_64 rng(33);
    auto lin = linucb_new(20, 1.0, 1.0);
    auto net = new_state(1.0, 20);
    for (int t = 0; t < 50; ++t) {
        const Vector g = oracle::random_vector(20, rng);
        lin = linucb_update(std::move(lin), g, 0.3);
        net = update_state(std::move(net), g, 1, 0.3);
    }
    CHECK(lin.precision.a_inv() == net.a_inv());
    CHECK(lin.precision.b() == net.b());
    CHECK(lin.precision.logdet_ratio() == net.logdet_ratio());
}

TEST_CASE("kernel UCB posterior") {
    std::mt19937_64 rng(34);
    KernelUcbState s(6, 0.5, 1.0, 1.0);
    const Vector x = oracle::random_vector(6, rng);
    CHECK(s.kernel(x, x) == 1.0);
    CHECK(s.posterior(x).width == doctest::Approx(1.0));
    std::vector<Vector> xs;
    for (int i = 0; i < 30; ++i) {
        xs.push_back(oracle::random_vector(6, rng).normalized());
        s.absorb(xs.back(), 0.1 * (i % 7));
    }
    // direct kernel algebra
    Matrix K(30, 30);
    Vector r(30);
    for (int i = 0; i < 30; ++i) {
        r[i] = 0.1 * (i % 7);
        for (int j = 0; j < 30; ++j) K(i, j) = std::exp(-0.5 * (xs[i] - xs[j]).squaredNorm());
    }
    const Matrix inv = (K + Matrix::Identity(30, 30)).inverse();
    CHECK((s.kernel_inv() - inv).cwiseAbs().maxCoeff() < 1e-10);
    const Vector probe = oracle::random_vector(6, rng).normalized();
    Vector k(30);
    for (int i = 0; i < 30; ++i) k[i] = std::exp(-0.5 * (xs[i] - probe).squaredNorm());
    const auto post = s.posterior(probe);
    CHECK(post.mean == doctest::Approx(k.dot(inv * r)).epsilon(1e-10));
    CHECK(post.raw_width_sq == doctest::Approx(1.0 - k.dot(inv * k)).epsilon(1e-10));

    const Vector far = 10.0 * Vector::Ones(6);
    CHECK(s.posterior(xs[3]).width < s.posterior(far).width);
    for (const auto& v : xs) {
        CHECK(s.posterior(v).raw_width_sq >= -1e-8);
        CHECK(s.posterior(v).width >= 0.0);
    }
}

TEST_CASE("kernel UCB dictionary stops growing at capacity") {
    std::mt19937_64 rng(35);
    KernelUcbState s(4, 1.0, 1.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        std::vector<Vector> arms;
        for (int i = 0; i < 3; ++i) arms.push_back(oracle::random_vector(4, rng).normalized());
        auto [pick, next] = kernelucb_step(std::move(s), std::span<const Vector>(arms),
                                           [](std::size_t i) { return i == 0 ? 1.0 : 0.0; });
        s = std::move(next);
        CHECK(s.size() <= 500);
        (void)pick;
    }
    CHECK(s.size() == 500);
    CHECK(s.frozen());
}

TEST_CASE("median heuristic and random policy") {
    const std::vector<Vector> pts = {Vector::Zero(2), Vector::Unit(2, 0), 2 * Vector::Unit(2, 0)};
    // squared distances 1, 4, 1 -> median 1
    CHECK(median_heuristic_gamma(pts) == 1.0);
    RandomPolicy a(5), b(5);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 1000; ++i) {
        const auto pa = a.select(10);
        CHECK(pa == b.select(10));
        ++counts[pa];
    }
    for (int c : counts) CHECK(c > 50);
    CHECK_THROWS_AS(a.select(0), ConfigError);
}
