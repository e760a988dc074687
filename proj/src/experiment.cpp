#include "cnnucb/experiment.hpp"

#include "cnnucb/baselines.hpp"
#include "cnnucb/errors.hpp"
#include "cnnucb/fc.hpp"
#include "cnnucb/kernels.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace cnnucb {

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// Stream seeds are shared by every algorithm of a repeat; policy seeds are not.
constexpr std::uint64_t kStreamSalt = 0x51a7e0f1c3b2d495ULL;
constexpr std::uint64_t kPolicySalt = 0x2545f4914f6cdd1dULL;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CnnUcbPolicy final : public Policy {
public:
    CnnUcbPolicy(const ExperimentConfig& cfg, const ArmShape& shape, std::uint64_t seed)
        : cfg_(cfg), seed_(seed) {
        topo_ = shape.height > 0
                    ? NetTopology::grid(cfg.cnn_layers, cfg.cnn_channels, cfg.cnn_kernel, shape.rows,
                                        shape.height, shape.width, cfg.activation)
                    : NetTopology::line(cfg.cnn_layers, cfg.cnn_channels, cfg.cnn_kernel,
                                        shape.rows, shape.cols, cfg.activation);
        topo_.validate();
        params0_ = init_params(topo_, seed);
        params_ = params0_;
        const std::size_t d = topo_.param_count();
        state_ = new_state(cfg.lambda, d, cfg.precision_for(d));
        if (cfg.logdet_report) init_grads_.resize(Eigen::Index(d), Eigen::Index(cfg.rounds));
    }

    std::string name() const override { return "cnn-ucb"; }

    Choice choose(const BanditContext& round) override {
        scores_ = score_arms(round.arms, params_, topo_, state_, cfg_.explore, &grads_);
        const std::size_t arm = select_arm(scores_);
        const auto& s = scores_[arm];
        return {arm, s.mean, s.width, s.psi1};
    }

    void observe(const BanditContext& round, std::size_t arm, double reward) override {
        // A is updated with the gradient at theta_{t-1}, the one used for scoring.
        state_ = update_state(std::move(state_), grads_.col(Eigen::Index(arm)), topo_.channels,
                              reward);
        if (cfg_.logdet_report && stored_ < std::size_t(init_grads_.cols())) {
            Vector g0;
            network_gradient(round.arms[arm], params0_, topo_, g0);
            init_grads_.col(Eigen::Index(stored_++)) = g0;
        }
        history_.append(round.arms[arm], reward);
        const std::size_t t = history_.size();
        TrainOptions opt;
        opt.batch_size = cfg_.batch_size;
        opt.batch_seed = mix(seed_, t);
        params_ = train_gd(cfg_.warm_start ? params_ : params0_, history_, cfg_.eta,
                           cfg_.k_schedule(t), topo_, opt);
    }

    bool keeps_init_gradients() const override { return cfg_.logdet_report; }
    Matrix init_gradients() const override { return init_grads_.leftCols(Eigen::Index(stored_)); }
    double logdet_ratio() const override { return state_.logdet_ratio(); }
    int width_m() const override { return topo_.channels; }

private:
    ExperimentConfig cfg_;
    std::uint64_t seed_;
    NetTopology topo_;
    CnnParams params0_, params_;
    PrecisionState state_;
    TrainingHistory history_;
    std::vector<UcbScore> scores_;
    Matrix grads_;
    Matrix init_grads_;
    std::size_t stored_ = 0;
};

class FcUcbPolicy final : public Policy {
public:
    FcUcbPolicy(const ExperimentConfig& cfg, const ArmShape& shape, std::uint64_t seed)
        : cfg_(cfg), seed_(seed) {
        topo_.depth = cfg.fc_depth;
        topo_.width = cfg.fc_width;
        topo_.input_dim = shape.rows * shape.cols;
        topo_.activation = cfg.activation;
        topo_.validate();
        // The psi terms are derived for the CNN; this baseline explores with nu.
        cfg_.explore.mode = ExploreMode::practical;
        theta0_ = fc_init_params(topo_, seed);
        theta_ = theta0_;
        const std::size_t d = topo_.param_count();
        state_ = new_state(cfg.lambda, d, cfg.precision_for(d));
    }

    std::string name() const override { return "fc-ucb"; }

    Choice choose(const BanditContext& round) override {
        const std::size_t n = round.flat.size();
        grads_.resize(n);
        std::vector<UcbScore> scores(n);
        const double p1 = psi1(state_, cfg_.explore);
        for (std::size_t i = 0; i < n; ++i) {
            const double f = fc_forward_gradient(round.flat[i], theta_, topo_, grads_[i]);
            scores[i] = make_score(f, grads_[i], topo_.width, state_, cfg_.explore, p1, {});
        }
        const std::size_t arm = select_arm(scores);
        return {arm, scores[arm].mean, scores[arm].width, scores[arm].psi1};
    }

    void observe(const BanditContext& round, std::size_t arm, double reward) override {
        state_ = update_state(std::move(state_), grads_[arm], topo_.width, reward);
        contexts_.push_back(round.flat[arm]);
        rewards_.push_back(reward);
        const std::size_t t = rewards_.size();
        TrainOptions opt;
        opt.batch_size = cfg_.batch_size;
        opt.batch_seed = mix(seed_, t);
        theta_ = fc_train_gd(cfg_.warm_start ? theta_ : theta0_, contexts_, rewards_, cfg_.eta,
                             cfg_.k_schedule(t), topo_, opt);
    }

    double logdet_ratio() const override { return state_.logdet_ratio(); }
    int width_m() const override { return topo_.width; }

private:
    ExperimentConfig cfg_;
    std::uint64_t seed_;
    FcTopology topo_;
    Vector theta0_, theta_;
    PrecisionState state_;
    std::vector<Vector> contexts_;
    std::vector<double> rewards_;
    std::vector<Vector> grads_;
};

class LinUcbPolicy final : public Policy {
public:
    LinUcbPolicy(const ExperimentConfig& cfg, const ArmShape& shape) {
        const std::size_t d = std::size_t(shape.rows) * std::size_t(shape.cols);
        const double alpha = cfg.linucb_alpha ? *cfg.linucb_alpha
                                              : default_linucb_alpha(cfg.explore.delta);
        state_ = linucb_new(d, cfg.lambda, alpha, cfg.precision_for(d));
    }

    std::string name() const override { return "linucb"; }

    Choice choose(const BanditContext& round) override {
        std::vector<LinUcbScore> scores;
        std::vector<double> totals;
        for (const auto& x : round.flat) {
            scores.push_back(linucb_score(state_, x));
            totals.push_back(scores.back().total);
        }
        const std::size_t arm = select_arm(std::span<const double>(totals));
        return {arm, scores[arm].mean, scores[arm].width, state_.alpha};
    }

    void observe(const BanditContext& round, std::size_t arm, double reward) override {
        state_ = linucb_update(std::move(state_), round.flat[arm], reward);
    }

    double logdet_ratio() const override { return state_.precision.logdet_ratio(); }

private:
    LinUcbState state_;
};

class KernelUcbPolicy final : public Policy {
public:
    KernelUcbPolicy(const ExperimentConfig& cfg, const ArmShape& shape)
        : cfg_(cfg), dim_(std::size_t(shape.rows) * std::size_t(shape.cols)) {
        if (cfg.kernel_gamma) make_state(*cfg.kernel_gamma);
    }

    std::string name() const override { return "kernelucb"; }

    Choice choose(const BanditContext& round) override {
        // Bandwidth from the first round's arms when not configured.
        if (!ready_) make_state(median_heuristic_gamma(round.flat));
        std::vector<KernelUcbState::Posterior> post;
        std::vector<double> totals;
        for (const auto& x : round.flat) {
            post.push_back(state_.posterior(x));
            totals.push_back(post.back().total);
        }
        const std::size_t arm = select_arm(std::span<const double>(totals));
        return {arm, post[arm].mean, post[arm].width, state_.beta()};
    }

    void observe(const BanditContext& round, std::size_t arm, double reward) override {
        state_.absorb(round.flat[arm], reward);
    }

private:
    void make_state(double gamma) {
        state_ = KernelUcbState(dim_, gamma, cfg_.lambda, cfg_.kernel_beta, cfg_.kernel_capacity);
        ready_ = true;
    }

    ExperimentConfig cfg_;
    std::size_t dim_;
    KernelUcbState state_;
    bool ready_ = false;
};

class RandomArmPolicy final : public Policy {
public:
    explicit RandomArmPolicy(std::uint64_t seed) : policy_(seed) {}
    std::string name() const override { return "random"; }
    Choice choose(const BanditContext& round) override { return {policy_.select(round.arms.size())}; }
    void observe(const BanditContext&, std::size_t, double) override {}

private:
    RandomPolicy policy_;
};

// The per-round view of a data stream.
struct StreamRound {
    BanditContext context;
    std::size_t correct = 0;
    std::vector<double> rewards;  // realized reward of each arm
    std::vector<double> expected; // expected reward of each arm
};

class RoundSource {
public:
    virtual ~RoundSource() = default;
    virtual StreamRound next() = 0;
};

class ImageSource final : public RoundSource {
public:
    ImageSource(const LabeledImageSet& set, std::uint64_t seed) : stream_(set, seed) {}
    StreamRound next() override {
        auto r = stream_.next();
        StreamRound out;
        out.correct = r.correct;
        for (std::size_t a = 0; a < r.arms.size(); ++a) {
            out.rewards.push_back(r.reward(a));
            out.context.flat.push_back(flatten(r.arms[a]));
        }
        out.expected = out.rewards;
        out.context.arms = std::move(r.arms);
        return out;
    }

private:
    ImageStream stream_;
};

class SyntheticSource final : public RoundSource {
public:
    explicit SyntheticSource(const SyntheticTask& task) : stream_(task) {}
    StreamRound next() override {
        auto r = stream_.next();
        StreamRound out;
        out.correct = r.best();
        out.rewards = r.rewards;
        out.expected = r.f_star;
        for (const auto& x : r.arms) out.context.flat.push_back(flatten(x));
        out.context.arms = std::move(r.arms);
        return out;
    }

private:
    SyntheticStream stream_;
};

std::filesystem::path resolve_file(const std::filesystem::path& dir, const std::string& name) {
    const std::filesystem::path given(name);
    std::filesystem::path p = given.is_absolute() ? given : dir / given;
    if (!std::filesystem::exists(p)) {
        auto gz = p;
        gz += ".gz";
        if (std::filesystem::exists(gz)) return gz;
    }
    return p;
}

LabeledImageSet load_dataset(const ExperimentConfig& cfg) {
    const auto dir = cfg.resolved_data_dir();
    if (cfg.dataset == DatasetKind::cifar10) {
        std::vector<std::string> names = cfg.cifar_batches;
        if (names.empty())
            for (int i = 1; i <= 5; ++i)
                names.push_back("cifar-10-batches-bin/data_batch_" + std::to_string(i) + ".bin");
        std::vector<std::filesystem::path> paths;
        for (const auto& n : names) paths.push_back(resolve_file(dir, n));
        return load_cifar10(paths);
    }
    const std::string sub = cfg.dataset == DatasetKind::mnist ? "mnist/" : "notmnist/";
    const auto images = resolve_file(dir, cfg.images.empty() ? sub + "train-images-idx3-ubyte"
                                                             : cfg.images);
    const auto labels = resolve_file(dir, cfg.labels.empty() ? sub + "train-labels-idx1-ubyte"
                                                             : cfg.labels);
    return load_idx(images, labels);
}

struct RunWriter {
    std::ostream& out;
    std::vector<std::pair<std::string, LogdetReport>>* logdet;
    std::vector<std::size_t> logdet_repeats;
};

void run_all(const ExperimentConfig& cfg, RunWriter& w, bool progress) {
    cfg.validate();
    std::optional<LabeledImageSet> images;
    ArmShape shape;
    if (cfg.dataset == DatasetKind::synthetic) {
        shape.rows = 1;
        shape.cols = cfg.synthetic_dim;
    } else {
        images = load_dataset(cfg);
        shape.rows = images->channels * images->n_classes;
        shape.cols = images->pixel_count();
        shape.height = images->height;
        shape.width = images->width;
    }

    w.out << kRoundsSchema << '\n' << kRoundsHeader << '\n';
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
        const std::uint64_t seed = cfg.seed + rep;
        for (std::size_t ai = 0; ai < cfg.algorithms.size(); ++ai) {
            const Algorithm algo = cfg.algorithms[ai];
            std::unique_ptr<RoundSource> source;
            if (images) {
                source = std::make_unique<ImageSource>(*images, mix(seed, kStreamSalt));
            } else {
                source = std::make_unique<SyntheticSource>(
                    make_synthetic_task(cfg.synthetic_kind, cfg.synthetic_dim, cfg.synthetic_arms,
                                        cfg.synthetic_noise, mix(seed, kStreamSalt)));
            }
            auto policy = make_policy(algo, cfg, shape, mix(seed, kPolicySalt));
            double cum = 0.0;
            for (std::size_t t = 1; t <= cfg.rounds; ++t) {
                StreamRound round = source->next();
                const auto t0 = std::chrono::steady_clock::now();
                const Choice c = policy->choose(round.context);
                const double reward = round.rewards[c.arm];
                try {
                    policy->observe(round.context, c.arm, reward);
                } catch (const DivergedError&) {
                    w.out.flush();
                    throw;
                }
                const auto t1 = std::chrono::steady_clock::now();
                RoundRecord r;
                r.round = t;
                r.repeat = rep;
                r.algorithm = policy->name();
                r.chosen_arm = c.arm;
                r.correct_arm = round.correct;
                r.reward = reward;
                r.regret = round.expected[round.correct] - round.expected[c.arm];
                cum += r.regret;
                r.cum_regret = cum;
                r.mean = c.mean;
                r.width = c.width;
                r.psi1 = c.psi1;
                if (cfg.timing)
                    r.wallclock_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
                write_record(w.out, r);
            }
            if (progress)
                std::clog << "repeat " << rep << ' ' << policy->name() << ": cum_regret " << cum
                          << " after " << cfg.rounds << " rounds\n";
            if (cfg.logdet_report && w.logdet && policy->keeps_init_gradients()) {
                const auto report = logdet_report(policy->init_gradients(), policy->width_m(),
                                                  cfg.lambda, policy->logdet_ratio(), cfg.rounds);
                w.logdet->emplace_back(policy->name(), report);
                w.logdet_repeats.push_back(rep);
            }
        }
    }
    w.out.flush();
}

} // namespace

void write_record(std::ostream& out, const RoundRecord& r) {
    out << r.round << ',' << r.repeat << ',' << r.algorithm << ',' << r.chosen_arm << ','
        << r.correct_arm << ',' << fmt(r.reward) << ',' << fmt(r.regret) << ','
        << fmt(r.cum_regret) << ',' << fmt(r.mean) << ',' << fmt(r.width) << ',' << fmt(r.psi1)
        << ',' << fmt(r.wallclock_ms) << '\n';
}

std::unique_ptr<Policy> make_policy(Algorithm algorithm, const ExperimentConfig& cfg,
                                    const ArmShape& shape, std::uint64_t seed) {
    switch (algorithm) {
    case Algorithm::cnn_ucb: return std::make_unique<CnnUcbPolicy>(cfg, shape, seed);
    case Algorithm::fc_ucb: return std::make_unique<FcUcbPolicy>(cfg, shape, seed);
    case Algorithm::linucb: return std::make_unique<LinUcbPolicy>(cfg, shape);
    case Algorithm::kernelucb: return std::make_unique<KernelUcbPolicy>(cfg, shape);
    case Algorithm::random: return std::make_unique<RandomArmPolicy>(seed);
    }
    throw ConfigError("unknown algorithm");
}

void run_experiment(const ExperimentConfig& cfg, std::ostream& out,
                    std::vector<std::pair<std::string, LogdetReport>>* logdet) {
    RunWriter w{out, logdet, {}};
    run_all(cfg, w, false);
}

RunOutput run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    RunOutput paths;
    paths.config_echo = out_dir / "config.ini";
    {
        ExperimentConfig effective = cfg;
        effective.data_dir = cfg.resolved_data_dir();
        std::ofstream echo(paths.config_echo);
        write_config(echo, effective);
    }
    paths.rounds_csv = out_dir / "rounds.csv";
    std::ofstream csv(paths.rounds_csv);
    if (!csv) throw ConfigError("cannot write " + paths.rounds_csv.string());
    std::vector<std::pair<std::string, LogdetReport>> reports;
    RunWriter w{csv, &reports, {}};
    run_all(cfg, w, true);

    if (!reports.empty()) {
        paths.logdet_csv = out_dir / "logdet.csv";
        std::ofstream out(paths.logdet_csv);
        out << "repeat,algorithm,rounds,logdet_ratio,d_bar,d_bar_eigen,bound_rhs,holds\n";
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const auto& [name, r] = reports[i];
            out << w.logdet_repeats[i] << ',' << name << ',' << r.rounds << ','
                << fmt(r.logdet_ratio) << ',' << fmt(r.d_bar) << ',' << fmt(r.d_bar_eigen) << ','
                << fmt(r.bound_rhs) << ',' << (r.holds() ? "true" : "false") << '\n';
        }
    }
    return paths;
}

std::vector<RoundRecord> read_rounds_csv(std::istream& in) {
    std::vector<RoundRecord> out;
    std::string line;
    bool header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != kRoundsHeader)
                throw FormatError("rounds CSV: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (f.size() != 12)
            throw FormatError("rounds CSV line " + std::to_string(line_no) + ": expected 12 fields");
        try {
            RoundRecord r;
            r.round = std::stoull(f[0]);
            r.repeat = std::stoull(f[1]);
            r.algorithm = f[2];
            r.chosen_arm = std::stoull(f[3]);
            r.correct_arm = std::stoull(f[4]);
            r.reward = std::stod(f[5]);
            r.regret = std::stod(f[6]);
            r.cum_regret = std::stod(f[7]);
            r.mean = std::stod(f[8]);
            r.width = std::stod(f[9]);
            r.psi1 = std::stod(f[10]);
            r.wallclock_ms = std::stod(f[11]);
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw FormatError("rounds CSV line " + std::to_string(line_no) + ": bad number");
        }
    }
    if (!header) throw FormatError("rounds CSV: missing header");
    return out;
}

namespace {

// series key: (source, algorithm, repeat)
using SeriesKey = std::tuple<std::size_t, std::string, std::size_t>;

Summary summarize_series(const std::map<SeriesKey, std::vector<std::pair<std::size_t, double>>>& series) {
    std::map<std::string, std::vector<const std::vector<std::pair<std::size_t, double>>*>> by_algo;
    for (const auto& [key, s] : series) by_algo[std::get<1>(key)].push_back(&s);
    if (by_algo.empty()) throw FormatError("summarize: no rounds in the inputs");

    Summary out;
    for (const auto& [algo, runs] : by_algo) {
        const auto& grid = *runs.front();
        for (const auto* r : runs) {
            if (r->size() != grid.size())
                throw FormatError("summarize: " + algo + " runs cover different round grids");
            for (std::size_t i = 0; i < grid.size(); ++i)
                if ((*r)[i].first != grid[i].first)
                    throw FormatError("summarize: " + algo + " runs cover different round grids");
        }
        const double n = static_cast<double>(runs.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double sum = 0.0;
            for (const auto* r : runs) sum += (*r)[i].second;
            const double mean = sum / n;
            double ss = 0.0;
            for (const auto* r : runs) ss += ((*r)[i].second - mean) * ((*r)[i].second - mean);
            SummaryRow row{algo, grid[i].first, runs.size(), mean,
                           runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
            out.rows.push_back(row);
        }
        if (!grid.empty()) out.final_rows.push_back(out.rows.back());
    }
    return out;
}

void add_records(std::map<SeriesKey, std::vector<std::pair<std::size_t, double>>>& series,
                 std::size_t source, const std::vector<RoundRecord>& records) {
    for (const auto& r : records)
        series[{source, r.algorithm, r.repeat}].emplace_back(r.round, r.cum_regret);
}

} // namespace

Summary summarize_records(const std::vector<RoundRecord>& records) {
    std::map<SeriesKey, std::vector<std::pair<std::size_t, double>>> series;
    add_records(series, 0, records);
    return summarize_series(series);
}

Summary summarize(const std::vector<std::filesystem::path>& csv_paths) {
    if (csv_paths.empty()) throw ConfigError("summarize needs at least one run file");
    std::map<SeriesKey, std::vector<std::pair<std::size_t, double>>> series;
    for (std::size_t i = 0; i < csv_paths.size(); ++i) {
        std::ifstream in(csv_paths[i]);
        if (!in) throw FormatError("cannot read " + csv_paths[i].string());
        add_records(series, i, read_rounds_csv(in));
    }
    return summarize_series(series);
}

void Summary::write_csv(std::ostream& out) const {
    out << "algorithm,round,repeats,mean_cum_regret,std_cum_regret\n";
    for (const auto& r : rows)
        out << r.algorithm << ',' << r.round << ',' << r.repeats << ',' << fmt(r.mean_cum_regret)
            << ',' << fmt(r.std_cum_regret) << '\n';
}

void Summary::write_final_table(std::ostream& out) const {
    out << std::left << std::setw(12) << "algorithm" << std::right << std::setw(8) << "round"
        << std::setw(9) << "repeats" << std::setw(14) << "mean" << std::setw(12) << "std" << '\n';
    for (const auto& r : final_rows)
        out << std::left << std::setw(12) << r.algorithm << std::right << std::setw(8) << r.round
            << std::setw(9) << r.repeats << std::setw(14) << std::fixed << std::setprecision(3)
            << r.mean_cum_regret << std::setw(12) << r.std_cum_regret << '\n'
            << std::defaultfloat;
}

} // namespace cnnucb
