#include "cnnucb/config.hpp"
#include "cnnucb/errors.hpp"

#include <doctest.h>

#include <sstream>

using namespace cnnucb;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string echo(const ExperimentConfig& cfg) {
    std::ostringstream out;
    write_config(out, cfg);
    return out.str();
}

} // namespace

TEST_CASE("defaults match the experimental setting") {
    const ExperimentConfig cfg;
    CHECK(cfg.lambda == 1.0);
    CHECK(cfg.eta == 0.001);
    CHECK(cfg.explore.delta == 0.1);
    CHECK(cfg.cnn_layers == 3);
    CHECK(cfg.cnn_channels == 20);
    CHECK(cfg.cnn_kernel == 4);
    CHECK(cfg.fc_depth == 4);
    CHECK(cfg.fc_width == 100);
    CHECK(cfg.kernel_capacity == 500);
    CHECK(cfg.repeats == 5);
    CHECK(cfg.algorithms.size() == 5);
}

TEST_CASE("k schedule: k = t up to the threshold, then the constant") {
    ExperimentConfig cfg;
    CHECK(cfg.k_schedule(1) == 1);
    CHECK(cfg.k_schedule(200) == 200);
    CHECK(cfg.k_schedule(201) == 100);
    CHECK(cfg.k_schedule(5000) == 100);
    cfg.k_max = 30;
    CHECK(cfg.k_schedule(20) == 20);
    CHECK(cfg.k_schedule(150) == 30);
    CHECK(cfg.k_schedule(300) == 30);
}

TEST_CASE("parse reads sections, comments and quoted values") {
    const auto cfg = parse(R"(# leading comment
[experiment]
dataset = synthetic
synthetic_kind = cosine
rounds = 40
repeats = 2
seed = 9
algorithms = cnn-ucb, random
data_dir = "/tmp/some dir"
; other comment style

[cnn]
layers = 2
channels = 8

[bandit]
lambda = 0.5
eta = 0.01
precision = diagonal

[training]
k_max = 7
warm_start = true

[linucb]
alpha = 0.25

[kernelucb]
gamma = median
)");
    CHECK(cfg.dataset == DatasetKind::synthetic);
    CHECK(cfg.synthetic_kind == SyntheticKind::cosine);
    CHECK(cfg.rounds == 40);
    CHECK(cfg.repeats == 2);
    CHECK(cfg.seed == 9);
    REQUIRE(cfg.algorithms.size() == 2);
    CHECK(cfg.algorithms[0] == Algorithm::cnn_ucb);
    CHECK(cfg.algorithms[1] == Algorithm::random);
    CHECK(cfg.data_dir == std::filesystem::path("/tmp/some dir"));
    CHECK(cfg.cnn_layers == 2);
    CHECK(cfg.cnn_channels == 8);
    CHECK(cfg.lambda == 0.5);
    CHECK(cfg.eta == 0.01);
    CHECK(cfg.precision == PrecisionChoice::diagonal);
    CHECK(cfg.k_max == 7);
    CHECK(cfg.warm_start);
    REQUIRE(cfg.linucb_alpha);
    CHECK(*cfg.linucb_alpha == 0.25);
    CHECK_FALSE(cfg.kernel_gamma);
}

TEST_CASE("write_config round-trips every field") {
    ExperimentConfig cfg;
    cfg.dataset = DatasetKind::cifar10;
    cfg.cifar_batches = {"a.bin", "b.bin"};
    cfg.eta = 0.1 + 0.2; // not exactly representable as a short decimal
    cfg.lambda = 1.0 / 3.0;
    cfg.explore.nu = 0.7;
    cfg.kernel_gamma = 0.125;
    cfg.timing = true;
    cfg.algorithms = {Algorithm::linucb, Algorithm::kernelucb};
    const auto text = echo(cfg);
    const auto back = parse(text);
    CHECK(echo(back) == text);
    CHECK(back.eta == cfg.eta);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.cifar_batches == cfg.cifar_batches);
    CHECK(echo(parse(echo(ExperimentConfig{}))) == echo(ExperimentConfig{}));
}

TEST_CASE("unknown keys, bad values and invalid settings are ConfigError") {
    CHECK_THROWS_AS(parse("[experiment]\nroundz = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse("[nosuch]\nrounds = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse("rounds = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nrounds = many\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nrounds = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nrounds = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\ndataset = imagenet\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nalgorithms = cnn-ucb, neural-ts\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\ntiming = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse("[bandit]\nlambda = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[bandit]\neta = -0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[bandit]\ndelta = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[fc]\ndepth = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[kernelucb]\ngamma = 0\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/cnnucb.ini"), ConfigError);
}

TEST_CASE("precision choice switches to the diagonal above the cap") {
    ExperimentConfig cfg;
    CHECK(cfg.precision_for(8192) == PrecisionMode::full);
    CHECK(cfg.precision_for(8193) == PrecisionMode::diagonal);
    cfg.precision = PrecisionChoice::full;
    CHECK(cfg.precision_for(100000) == PrecisionMode::full);
    cfg.precision = PrecisionChoice::diagonal;
    CHECK(cfg.precision_for(10) == PrecisionMode::diagonal);
}

TEST_CASE("data directory falls back to the environment, then ./data") {
    ExperimentConfig cfg;
    cfg.data_dir = "/explicit";
    CHECK(cfg.resolved_data_dir() == std::filesystem::path("/explicit"));
    cfg.data_dir.clear();
    ::setenv("CNNUCB_DATA_DIR", "/from-env", 1);
    CHECK(cfg.resolved_data_dir() == std::filesystem::path("/from-env"));
    ::unsetenv("CNNUCB_DATA_DIR");
    CHECK(cfg.resolved_data_dir() == std::filesystem::path("data"));
}
