#pragma once

#include "cnnucb/config.hpp"
#include "cnnucb/theory_lab.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cnnucb {

inline constexpr const char* kRoundsSchema = "# cnnucb-rounds v1";
inline constexpr const char* kRoundsHeader =
    "round,repeat,algorithm,chosen_arm,correct_arm,reward,regret,cum_regret,mean,width,psi1,"
    "wallclock_ms";

struct RoundRecord {
    std::size_t round = 0; // 1-based
    std::size_t repeat = 0;
    std::string algorithm;
    std::size_t chosen_arm = 0;
    std::size_t correct_arm = 0;
    double reward = 0.0;
    double regret = 0.0;
    double cum_regret = 0.0;
    double mean = 0.0;
    double width = 0.0;
    double psi1 = 0.0;
    double wallclock_ms = 0.0;
};

void write_record(std::ostream& out, const RoundRecord& r);

// One round as every policy sees it.
struct BanditContext {
    std::vector<Matrix> arms;
    std::vector<Vector> flat; // column-major flattening of each arm
};

struct Choice {
    std::size_t arm = 0;
    double mean = 0.0;
    double width = 0.0;
    double psi1 = 0.0;
};

// A bandit learner. choose() sees round t's arms, observe() gets the reward of
// the arm it chose.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual Choice choose(const BanditContext& round) = 0;
    virtual void observe(const BanditContext& round, std::size_t arm, double reward) = 0;
    // Initialization gradients of the played arms (column-wise) and the
    // tracked log-det ratio, for policies that keep them.
    virtual bool keeps_init_gradients() const { return false; }
    virtual Matrix init_gradients() const { return {}; }
    virtual double logdet_ratio() const { return 0.0; }
    virtual int width_m() const { return 1; }
};

// Shape of the arms a stream produces.
struct ArmShape {
    int rows = 1;
    int cols = 1;
    int height = 0; // image grids; 0 for line-shaped arms
    int width = 0;
};

// cfg.rounds sizes the initialization-gradient store when cfg.logdet_report is on.
std::unique_ptr<Policy> make_policy(Algorithm algorithm, const ExperimentConfig& cfg,
                                    const ArmShape& shape, std::uint64_t seed);

struct RunOutput {
    std::filesystem::path rounds_csv;
    std::filesystem::path config_echo;
    std::filesystem::path logdet_csv; // empty when no policy reported one
};

// Writes <out_dir>/rounds.csv, <out_dir>/config.ini and, when enabled and any
// policy keeps initialization gradients, <out_dir>/logdet.csv. On a training
// divergence the rows so far are flushed and DivergedError is rethrown.
RunOutput run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// In-memory variant used by the acceptance checks: rows go to `out`.
void run_experiment(const ExperimentConfig& cfg, std::ostream& out,
                    std::vector<std::pair<std::string, LogdetReport>>* logdet = nullptr);

struct SummaryRow {
    std::string algorithm;
    std::size_t round = 0;
    std::size_t repeats = 0;
    double mean_cum_regret = 0.0;
    double std_cum_regret = 0.0; // sample standard deviation; 0 for one repeat
};

struct Summary {
    std::vector<SummaryRow> rows; // per algorithm, per round
    std::vector<SummaryRow> final_rows; // last round of each algorithm

    void write_csv(std::ostream& out) const;
    void write_final_table(std::ostream& out) const;
};

// Every (algorithm, repeat) series across the inputs must cover the same
// rounds; otherwise FormatError.
Summary summarize(const std::vector<std::filesystem::path>& csv_paths);
Summary summarize_records(const std::vector<RoundRecord>& records);

std::vector<RoundRecord> read_rounds_csv(std::istream& in);

} // namespace cnnucb
