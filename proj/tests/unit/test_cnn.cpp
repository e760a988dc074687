#include "cnnucb/cnn.hpp"
#include "cnnucb/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace cnnucb;

namespace {

NetTopology scalar_net() { return NetTopology::line(1, 1, 1, 1, 1); }

CnnParams scalar_params(double w1, double w_out) {
    Vector flat(2);
    flat << w1, w_out;
    return CnnParams(scalar_net(), flat);
}

ArmContext scalar_arm() { return ArmContext::Constant(1, 1, 1.0); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

TEST_CASE("init_params is deterministic and has the stated moments") {
    const auto topo = NetTopology::line(2, 4, 3, 1, 9);
    CHECK(init_params(topo, 7).flat() == init_params(topo, 7).flat());
    CHECK(init_params(topo, 7).flat() != init_params(topo, 8).flat());

    const auto wide = NetTopology::line(1, 10000, 1, 1, 1);
    const auto params = init_params(wide, 3);
    const auto w1 = params.layer(0);
    const double mean1 = w1.mean();
    const double var1 = (w1.array() - mean1).square().sum() / double(w1.size() - 1);
    CHECK(std::abs(mean1) < 0.05);
    CHECK(std::abs(var1 - 1.0) < 0.05);

    const auto wo = params.layer(1);
    const double mean_o = wo.mean();
    const double var_o = (wo.array() - mean_o).square().sum() / double(wo.size() - 1);
    CHECK(std::abs(var_o - 1.0 / 10000) / (1.0 / 10000) < 0.2);
}

TEST_CASE("extract_patches on a line and a grid") {
    SUBCASE("line, q = 3") {
        const auto topo = NetTopology::line(1, 1, 3, 1, 3);
        Matrix h(1, 3);
        h << 1, 2, 3;
        Matrix expected(3, 3);
        expected << 0, 1, 2, //
            1, 2, 3,         //
            2, 3, 0;
        CHECK(extract_patches(h, topo) == expected);
        CHECK(extract_patches(Matrix::Zero(1, 3), topo).isZero(0));
    }
    SUBCASE("grid 2x2, k = 2") {
        const auto topo = NetTopology::grid(1, 1, 2, 1, 2, 2);
        const double a = 1.5, b = -2, c = 3.25, d = 7;
        Matrix h(1, 4);
        h << a, b, c, d;
        Matrix expected(4, 4);
        expected.col(0) << a, b, c, d;
        expected.col(1) << b, 0, d, 0;
        expected.col(2) << c, d, 0, 0;
        expected.col(3) << d, 0, 0, 0;
        CHECK(extract_patches(h, topo) == expected);
    }
    SUBCASE("row order is channel-major") {
        const auto topo = NetTopology::line(1, 1, 3, 2, 3);
        Matrix h(2, 3);
        h << 1, 2, 3, //
            4, 5, 6;
        const Matrix out = extract_patches(h, topo);
        CHECK(out.rows() == 6);
        CHECK(out(3, 1) == 4); // channel 1, slot 0 of pixel 1
        CHECK(out(5, 1) == 6);
    }
    CHECK_THROWS_AS(extract_patches(Matrix::Zero(1, 4), NetTopology::line(1, 1, 3, 1, 3)),
                    DimensionError);
}

TEST_CASE("patch operator is adjoint to scatter_patches") {
    std::mt19937_64 rng(11);
    const std::vector<NetTopology> family = {
        NetTopology::line(1, 1, 3, 1, 7),      NetTopology::line(1, 1, 4, 1, 6),
        NetTopology::grid(1, 1, 2, 1, 3, 4),   NetTopology::grid(1, 1, 3, 1, 5, 5),
        NetTopology::grid(1, 1, 4, 1, 6, 6),   NetTopology::line(1, 1, 5, 1, 3),
    };
    for (const auto& topo : family)
        for (int rows : {1, 3}) {
            const Matrix h = oracle::random_vector(rows * topo.pixels(), rng)
                                 .reshaped(rows, topo.pixels());
            const Matrix u = oracle::random_vector(rows * topo.patch * topo.pixels(), rng)
                                 .reshaped(rows * topo.patch, topo.pixels());
            const double lhs = u.cwiseProduct(extract_patches(h, topo)).sum();
            const double rhs = scatter_patches(u, rows, topo).cwiseProduct(h).sum();
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
}

TEST_CASE("forward pass") {
    SUBCASE("all-zero params") {
        const auto topo = NetTopology::line(2, 3, 3, 2, 5);
        const auto trace =
            forward(Matrix::Constant(2, 5, 0.3), CnnParams::zeros(topo), topo);
        const double expected = 0.5 / std::sqrt(9.0);
        CHECK((trace.layers[0].array() - expected).abs().maxCoeff() < 1e-15);
        CHECK(trace.output == 0.0);
    }
    SUBCASE("scalar net") {
        const auto trace = forward(scalar_arm(), scalar_params(2, 3), scalar_net());
        CHECK(trace.layers[0](0, 0) == doctest::Approx(0.880797).epsilon(1e-6));
        CHECK(trace.output == doctest::Approx(2.642391).epsilon(1e-6));
    }
    SUBCASE("matches the loop oracle") {
        std::mt19937_64 rng(5);
        const std::vector<NetTopology> family = {
            NetTopology::line(2, 4, 3, 1, 9), NetTopology::line(3, 3, 4, 2, 6),
            NetTopology::grid(2, 3, 2, 2, 3, 3), NetTopology::grid(1, 5, 3, 1, 4, 4),
            NetTopology::line(2, 4, 3, 1, 9, Activation::softplus)};
        for (const auto& topo : family) {
            const auto params = init_params(topo, rng());
            const Matrix x = oracle::random_unit_arm(topo.in_channels, topo.pixels(), rng);
            CHECK(std::abs(predict(x, params, topo) - oracle::naive_output(x, params.flat(), topo)) <
                  1e-12);
        }
    }
    SUBCASE("pure and deterministic") {
        const auto topo = NetTopology::line(2, 4, 3, 1, 9);
        const auto params = init_params(topo, 1);
        std::mt19937_64 rng(2);
        const Matrix x = oracle::random_unit_arm(1, 9, rng);
        const auto a = forward(x, params, topo);
        const auto b = forward(x, params, topo);
        CHECK(a.output == b.output);
        for (std::size_t l = 0; l < a.layers.size(); ++l) CHECK(a.layers[l] == b.layers[l]);
    }
    SUBCASE("errors") {
        const auto topo = NetTopology::line(2, 4, 3, 1, 9);
        auto flat = init_params(topo, 1).flat();
        CHECK_THROWS_AS(forward(Matrix::Zero(1, 8), CnnParams(topo, flat), topo), DimensionError);
        flat[0] = std::numeric_limits<double>::infinity();
        try {
            forward(Matrix::Constant(1, 9, 1.0 / 3), CnnParams(topo, flat), topo);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
        }
    }
}

TEST_CASE("scale at initialization shrinks with width") {
    std::mt19937_64 rng(17);
    const Matrix x = oracle::random_unit_arm(1, 9, rng);
    double previous = std::numeric_limits<double>::infinity();
    for (int m : {8, 32, 128}) {
        const auto topo = NetTopology::line(2, m, 3, 1, 9);
        std::vector<double> values;
        for (std::uint64_t seed = 0; seed < 100; ++seed)
            values.push_back(std::abs(predict(x, init_params(topo, seed), topo)));
        const double med = median(values);
        CHECK(med < previous);
        previous = med;
    }
}

TEST_CASE("network gradient") {
    SUBCASE("scalar net, hand chain rule") {
        const auto g = network_gradient(scalar_arm(), scalar_params(2, 3), scalar_net());
        CHECK(g.flat[1] == doctest::Approx(0.880797).epsilon(1e-6));
        CHECK(g.flat[0] == doctest::Approx(0.314982).epsilon(1e-6));
        CHECK(g.per_layer_norms.size() == 2);
    }
    SUBCASE("zero read-out kills every conv gradient") {
        const auto topo = NetTopology::line(2, 4, 3, 1, 9);
        Vector flat = init_params(topo, 3).flat();
        const auto params0 = CnnParams(topo, flat);
        flat.tail(static_cast<Eigen::Index>(4 * 9)).setZero();
        const auto params = CnnParams(topo, flat);
        std::mt19937_64 rng(1);
        const auto g = network_gradient(oracle::random_unit_arm(1, 9, rng), params, topo);
        CHECK(g.flat.head(params.layer_offset(2)).isZero(0));
        CHECK(g.per_layer_norms[0] == 0.0);
    }
    SUBCASE("central differences on random small nets") {
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 5; ++trial) {
            const auto topo = NetTopology::line(2, 4, 3, 1, 9);
            const auto params = init_params(topo, rng());
            const Matrix x = oracle::random_unit_arm(1, 9, rng);
            const auto g = network_gradient(x, params, topo);
            const Vector fd = oracle::central_difference(
                [&](const Vector& th) { return oracle::naive_output(x, th, topo); },
                params.flat(), 1e-5);
            CHECK(oracle::max_relative_error(g.flat, fd) < 1e-4);
        }
    }
}

TEST_CASE("quadratic loss") {
    const auto topo = NetTopology::line(2, 4, 3, 1, 9);
    const auto params = init_params(topo, 9);
    std::mt19937_64 rng(4);
    TrainingHistory fit, noisy, reversed;
    std::vector<std::pair<Matrix, double>> samples;
    for (int i = 0; i < 6; ++i) {
        Matrix x = oracle::random_unit_arm(1, 9, rng);
        fit.append(x, predict(x, params, topo));
        samples.emplace_back(x, 0.1 * i);
    }
    for (const auto& [x, r] : samples) noisy.append(x, r);
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) reversed.append(it->first, it->second);

    CHECK(loss(fit, params, topo) == 0.0);
    CHECK(loss(noisy, params, topo) == doctest::Approx(loss(reversed, params, topo)).epsilon(1e-14));

    TrainingHistory one;
    one.append(scalar_arm(), 1.0);
    CHECK(loss(one, scalar_params(2, 3), scalar_net()) == doctest::Approx(1.348724).epsilon(1e-6));
    CHECK_THROWS_AS(loss(TrainingHistory{}, params, topo), EmptyHistoryError);
}

TEST_CASE("gradient descent training") {
    SUBCASE("k = 0 is the identity") {
        const auto topo = NetTopology::line(2, 4, 3, 1, 9);
        const auto params = init_params(topo, 1);
        TrainingHistory h;
        h.append(Matrix::Constant(1, 9, 1.0 / 3), 0.5);
        CHECK(train_gd(params, h, 0.1, 0, topo).flat() == params.flat());
    }
    SUBCASE("one step on the scalar net") {
        TrainingHistory h;
        h.append(scalar_arm(), 1.0);
        const auto out = train_gd(scalar_params(2, 3), h, 0.001, 1, scalar_net());
        CHECK(out.flat()[1] == doctest::Approx(2.998553).epsilon(1e-6));
        CHECK(out.flat()[0] == doctest::Approx(1.999483).epsilon(1e-6));
    }
    SUBCASE("loss is non-increasing at eta = 1/(m lambda + 1)") {
        const auto topo = NetTopology::line(2, 4, 3, 1, 9);
        const auto params = init_params(topo, 5);
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        TrainingHistory h;
        for (int i = 0; i < 10; ++i) h.append(oracle::random_unit_arm(1, 9, rng), u(rng));
        std::vector<double> trace;
        TrainOptions opts;
        opts.loss_trace = &trace;
        const double eta = 1.0 / (4 * 1.0 + 1);
        train_gd(params, h, eta, 100, topo, opts);
        REQUIRE(trace.size() == 100);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
    }
    SUBCASE("divergence is reported with the iteration") {
        const auto topo = NetTopology::line(1, 2, 1, 1, 2, Activation::softplus);
        Vector flat(6);
        flat << 1, 1, 1e150, 1e150, 1e150, 1e150;
        TrainingHistory h;
        h.append(Matrix::Constant(1, 2, std::sqrt(0.5)), 1.0);
        try {
            train_gd(CnnParams(topo, flat), h, 1e200, 5, topo);
            FAIL("expected divergence");
        } catch (const DivergedError& e) {
            CHECK(e.iteration() >= 1);
        }
    }
}

TEST_CASE("param_distance") {
    const auto topo = NetTopology::line(2, 4, 3, 1, 9);
    const auto params0 = init_params(topo, 1);
    for (double d : param_distance(params0, params0)) CHECK(d == 0.0);

    Vector flat = params0.flat();
    flat[5] += 1e-3;
    const auto one = param_distance(CnnParams(topo, flat), params0);
    CHECK(one[0] == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(one[1] == 0.0);
    CHECK(one[2] == 0.0);

    std::mt19937_64 rng(2);
    const Vector moved = params0.flat() + oracle::random_vector(flat.size(), rng, 0.1);
    const auto dist = param_distance(CnnParams(topo, moved), params0);
    std::size_t pos = 0;
    for (int l = 0; l < params0.layer_count(); ++l) {
        const std::size_t n = static_cast<std::size_t>(params0.layer_rows(l) * params0.layer_cols(l));
        double ss = 0.0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            const double diff = moved[static_cast<Eigen::Index>(i)] - params0.flat()[static_cast<Eigen::Index>(i)];
            ss += diff * diff;
        }
        CHECK(std::abs(dist[static_cast<std::size_t>(l)] - std::sqrt(ss)) < 1e-12);
        pos += n;
    }
    CHECK_THROWS_AS(param_distance(params0, init_params(topo.with_channels(5), 1)), DimensionError);
}
