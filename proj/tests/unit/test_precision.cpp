#include "cnnucb/errors.hpp"
#include "cnnucb/precision.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace cnnucb;

TEST_CASE("new_state") {
    const auto s = new_state(1.0, 3);
    CHECK(s.a_inv() == Matrix::Identity(3, 3));
    CHECK(s.logdet_ratio() == 0.0);
    CHECK(s.rounds() == 0);
    CHECK(new_state(2.0, 2).a_inv() == 0.5 * Matrix::Identity(2, 2));
    CHECK_THROWS_AS(new_state(0.0, 2), ConfigError);
    CHECK_THROWS_AS(new_state(1.0, 0), ConfigError);
    CHECK_THROWS_AS(new_state(-1.0, 2), ConfigError);
    CHECK(parse_precision_mode("diagonal") == PrecisionMode::diagonal);
    CHECK_THROWS_AS(parse_precision_mode("dense"), ConfigError);
}

TEST_CASE("first update matches the rank-one closed form") {
    std::mt19937_64 rng(1);
    const double lambda = 1.7;
    const Vector g = oracle::random_vector(6, rng);
    const int m = 4;
    const auto s = update_state(new_state(lambda, 6), g, m, 0.3);
    const Vector u = g / 2.0;
    const Matrix expect =
        (Matrix::Identity(6, 6) - u * u.transpose() / (lambda + u.squaredNorm())) / lambda;
    CHECK((s.a_inv() - expect).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((s.b() - 0.3 * u).norm() < 1e-15);
    CHECK(s.theta_hat().isApprox(0.3 * u / (lambda + u.squaredNorm()), 1e-13));
    CHECK(s.rounds() == 1);
}

TEST_CASE("log-det against a dense determinant") {
    std::mt19937_64 rng(2);
    auto s = new_state(1.0, 3);
    Matrix a = Matrix::Identity(3, 3);
    for (int i = 0; i < 5; ++i) {
        const Vector u = oracle::random_vector(3, rng);
        s = update_state(std::move(s), u, 1, 0.0);
        a += u * u.transpose();
    }
    CHECK(s.logdet_ratio() == doctest::Approx(std::log(a.determinant())).epsilon(1e-10));
}

TEST_CASE("100 updates at d=50 against direct inversion") {
    std::mt19937_64 rng(3);
    const double lambda = 0.5;
    auto s = new_state(lambda, 50);
    Matrix a = lambda * Matrix::Identity(50, 50);
    double prev = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Vector g = oracle::random_vector(50, rng);
        s = update_state(std::move(s), g, 3, 1.0);
        a += g * g.transpose() / 3.0;
        CHECK(s.logdet_ratio() >= prev);
        prev = s.logdet_ratio();
    }
    CHECK((a * s.a_inv() - Matrix::Identity(50, 50)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((s.a_inv() - a.inverse()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(s.a_inv() == s.a_inv().transpose());
    const double direct = std::log(a.determinant()) - 50 * std::log(lambda);
    CHECK(std::abs(s.logdet_ratio() - direct) < 1e-6);
    // A_inv <= I / lambda
    Eigen::SelfAdjointEigenSolver<Matrix> es(s.a_inv());
    CHECK(es.eigenvalues().maxCoeff() <= 1.0 / lambda + 1e-12);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("sparse inputs take the same values as dense ones") {
    std::mt19937_64 rng(4);
    auto s = new_state(1.0, 40);
    for (int i = 0; i < 20; ++i) {
        Vector u = Vector::Zero(40);
        const int block = i % 4;
        u.segment(block * 10, 10) = oracle::random_vector(10, rng);
        const Vector dense_solve = s.a_inv() * u;
        CHECK((s.solve(u) - dense_solve).cwiseAbs().maxCoeff() < 1e-13);
        CHECK(s.quadratic_form(u) == doctest::Approx(u.dot(dense_solve)).epsilon(1e-12));
        s.absorb(u, 0.5);
    }
    CHECK(nonzero_indices(Vector::Unit(5, 3)) == std::vector<Eigen::Index>{3});
}

TEST_CASE("width shrinks for a repeated context") {
    std::mt19937_64 rng(5);
    const Vector u = oracle::random_vector(8, rng);
    auto s = new_state(1.0, 8);
    double prev = s.quadratic_form(u);
    for (int i = 0; i < 10; ++i) {
        s.absorb(u, 1.0);
        const double now = s.quadratic_form(u);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("diagonal mode") {
    std::mt19937_64 rng(6);
    auto s = new_state(2.0, 5, PrecisionMode::diagonal);
    Vector diag = Vector::Constant(5, 2.0);
    Vector b = Vector::Zero(5);
    for (int i = 0; i < 7; ++i) {
        const Vector u = oracle::random_vector(5, rng);
        s.absorb(u, 0.25 * i);
        diag += u.cwiseProduct(u);
        b += 0.25 * i * u;
    }
    CHECK((s.a_diagonal() - diag).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.logdet_ratio() ==
          doctest::Approx((diag.array() / 2.0).log().sum()).epsilon(1e-12));
    const Vector x = oracle::random_vector(5, rng);
    CHECK(s.quadratic_form(x) ==
          doctest::Approx((x.array().square() / diag.array()).sum()).epsilon(1e-12));
    CHECK(s.theta_hat().isApprox((b.array() / diag.array()).matrix(), 1e-12));
    CHECK_THROWS_AS(s.a_inv(), ConfigError);
}

TEST_CASE("precision errors") {
    auto s = new_state(1.0, 3);
    Vector bad(3);
    bad << 1.0, std::nan(""), 0.0;
    CHECK_THROWS_AS(s.absorb(bad, 0.0), NumericError);
    CHECK_THROWS_AS(s.absorb(Vector::Ones(4), 0.0), DimensionError);
    CHECK_THROWS_AS(update_state(s, Vector::Ones(3), 0, 0.0), ConfigError);
}
