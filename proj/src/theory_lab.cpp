#include "cnnucb/theory_lab.hpp"

#include "cnnucb/datasets.hpp"
#include "cnnucb/errors.hpp"
#include "cnnucb/kernels.hpp"
#include "cnnucb/ucb.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>

namespace cnnucb {

ThetaStar theta_star_from_gradients(const Matrix& G, const Vector& f_star) {
    if (G.cols() != f_star.size())
        throw DimensionError("theta*: " + std::to_string(G.cols()) + " gradients but " +
                             std::to_string(f_star.size()) + " targets");
    if (G.cols() == 0) throw DimensionError("theta*: no arms");
    if (G.cols() > G.rows())
        throw DimensionError("theta*: more arms (" + std::to_string(G.cols()) +
                             ") than parameters (" + std::to_string(G.rows()) + ")");
    Eigen::BDCSVD<Matrix> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (!(sv.minCoeff() > 1e-10 * sv.maxCoeff()))
        throw RankError("gradient matrix is rank deficient: smallest singular value " +
                        std::to_string(sv.minCoeff()) + ", largest " + std::to_string(sv.maxCoeff()));
    ThetaStar out;
    const Vector coeff = (svd.matrixV().transpose() * f_star).cwiseQuotient(sv);
    out.displacement = svd.matrixU() * coeff;
    out.residual = (G.transpose() * out.displacement - f_star).norm();
    const Matrix gram = G.transpose() * G;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) throw RankError("G^T G is not positive definite");
    out.norm_sq = f_star.dot(llt.solve(f_star));
    out.lambda_1 = sv.minCoeff() * sv.minCoeff();
    return out;
}

ThetaStar construct_theta_star(std::span<const ArmContext> arms, const Vector& f_star,
                               const CnnParams& params0, const NetTopology& topo) {
    Vector f;
    Matrix G;
    kernels::outputs_and_gradients(params0, topo, arms, f, G);
    return theta_star_from_gradients(G, f_star);
}

const SweepStatistic& WidthResult::get(const std::string& name) const {
    for (const auto& s : stats)
        if (s.name == name) return s;
    throw ConfigError("no statistic '" + name + "' for width " + std::to_string(width));
}

void SweepReport::write_csv(std::ostream& out) const {
    out << "width,statistic,median,max,bound\n";
    out << std::setprecision(17);
    for (const auto& r : results) {
        if (r.diverged) {
            out << r.width << ",diverged,,,\n";
            continue;
        }
        for (const auto& s : r.stats) {
            out << r.width << ',' << s.name << ',' << s.median << ',' << s.max << ',';
            if (s.bound) out << *s.bound;
            out << '\n';
        }
    }
}

namespace {

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SweepStatistic summarize(std::string name, const std::vector<double>& values,
                         std::optional<double> bound = std::nullopt) {
    return {std::move(name), median_of(values), *std::max_element(values.begin(), values.end()),
            bound};
}

std::vector<ArmContext> unit_arms(const NetTopology& topo, std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<ArmContext> arms;
    for (std::size_t i = 0; i < n; ++i) {
        Matrix x(topo.in_channels, topo.pixels());
        for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = normal(rng);
        arms.push_back(x / x.norm());
    }
    return arms;
}

WidthResult measure_width(const NetTopology& topo, const TrainingHistory& history,
                          const std::vector<ArmContext>& probes, std::size_t k,
                          std::uint64_t seed, const SweepOptions& opt) {
    const int m = topo.channels;
    const double lambda = opt.lambda;
    const double root_m = std::sqrt(double(m));
    WidthResult res;
    res.width = m;
    res.eta = opt.eta ? *opt.eta : 1.0 / (m * lambda + 1.0);

    const Vector r = Eigen::Map<const Vector>(history.rewards().data(),
                                              Eigen::Index(history.size()));
    std::vector<double> drift, rel_drift, kernel, lin, ridge;
    std::vector<std::vector<double>> weight;
    for (std::size_t rep = 0; rep < opt.replicates; ++rep) {
        const CnnParams p0 = init_params(topo, seed + rep);
        CnnParams pt = p0;
        try {
            pt = train_gd(p0, history, res.eta, k, topo);
        } catch (const DivergedError& e) {
            res.diverged = true;
            res.diverged_reason = e.what();
            return res;
        }
        const Vector disp = pt.flat() - p0.flat();

        Vector f0, ft;
        Matrix g0, gt;
        kernels::outputs_and_gradients(p0, topo, probes, f0, g0);
        kernels::outputs_and_gradients(pt, topo, probes, ft, gt);
        for (Eigen::Index i = 0; i < g0.cols(); ++i) {
            const double d = (gt.col(i) - g0.col(i)).norm();
            drift.push_back(d);
            rel_drift.push_back(d / g0.col(i).norm());
            kernel.push_back(std::abs(gt.col(i).squaredNorm() - g0.col(i).squaredNorm()));
            lin.push_back(std::abs(ft[i] - g0.col(i).dot(disp)));
        }

        // Ridge estimate in the theta0-gradient features, through the t x t system:
        // (lambda I + U U^T)^{-1} U r = U (lambda I + U^T U)^{-1} r with U = G0 / sqrt(m).
        Vector fh;
        Matrix gh;
        kernels::outputs_and_gradients(p0, topo, history.contexts(), fh, gh);
        const Matrix U = gh / root_m;
        Matrix inner = U.transpose() * U;
        inner.diagonal().array() += lambda;
        const Vector theta_hat = U * inner.llt().solve(r);
        ridge.push_back((disp - theta_hat / root_m).norm());

        const auto layer = param_distance(pt, p0);
        weight.resize(layer.size());
        for (std::size_t l = 0; l < layer.size(); ++l) weight[l].push_back(root_m * layer[l]);
    }

    const auto b = theory_bounds(topo, opt.explore, history.size(), k, history.size(), lambda);
    res.stats.push_back(summarize("gradient_drift", drift, b.gradient_drift_bound));
    res.stats.push_back(summarize("relative_gradient_drift", rel_drift));
    res.stats.push_back(summarize("kernel_drift", kernel, b.kernel_drift_bound));
    res.stats.push_back(summarize("linearization_error", lin, b.linearization_bound));
    res.stats.push_back(summarize("ridge_distance", ridge));
    for (std::size_t l = 0; l < weight.size(); ++l)
        res.stats.push_back(summarize("weight_drift_l" + std::to_string(l + 1), weight[l], b.w));
    return res;
}

} // namespace

SweepReport width_sweep(const NetTopology& base, const std::vector<int>& widths,
                        std::size_t train_rounds, std::size_t k, std::uint64_t seed,
                        const SweepOptions& options) {
    base.validate();
    options.explore.validate();
    if (widths.empty()) throw ConfigError("width sweep needs at least one width");
    for (std::size_t i = 1; i < widths.size(); ++i)
        if (widths[i] <= widths[i - 1]) throw ConfigError("sweep widths must be strictly increasing");
    if (train_rounds == 0) throw ConfigError("width sweep needs at least one training observation");
    if (options.probes == 0) throw ConfigError("width sweep needs at least one probe");
    if (options.replicates == 0) throw ConfigError("width sweep needs at least one replicate");

    // Common random numbers: data, targets and probes do not depend on the width.
    std::mt19937_64 rng(seed);
    const auto train_arms = unit_arms(base, train_rounds, rng);
    const auto probes = unit_arms(base, options.probes, rng);
    const auto task = make_synthetic_task(SyntheticKind::linear,
                                          base.in_channels * base.pixels(), 1, 0.0, seed);
    TrainingHistory history;
    for (const auto& x : train_arms) history.append(x, task.f_star(x));

    SweepReport report;
    report.widths = widths;
    for (int m : widths)
        report.results.push_back(
            measure_width(base.with_channels(m), history, probes, k, seed, options));
    return report;
}

LogdetReport logdet_report(const Matrix& init_gradients, int m, double lambda,
                           double logdet_ratio, std::size_t rounds) {
    LogdetReport out;
    out.logdet_ratio = logdet_ratio;
    out.rounds = rounds;
    if (rounds == 0) return out;
    if (init_gradients.cols() == 0)
        throw ConfigError("log-det report: the run stored no initialization gradients");
    const Matrix K = normalized_gram(init_gradients, m);
    const double T = static_cast<double>(K.rows());
    out.d_bar = effective_dimension(K, lambda);
    Eigen::SelfAdjointEigenSolver<Matrix> es(K, Eigen::EigenvaluesOnly);
    out.d_bar_eigen = (es.eigenvalues().array() / lambda).log1p().sum() / std::log1p(T / lambda);
    out.bound_rhs = out.d_bar * std::log1p(T / lambda) + 1.0;
    return out;
}

} // namespace cnnucb
