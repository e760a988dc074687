#include "cnnucb/fc.hpp"

#include "cnnucb/errors.hpp"
#include "cnnucb/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cnnucb {

std::size_t FcTopology::param_count() const {
    const std::size_t m = static_cast<std::size_t>(width);
    return m * static_cast<std::size_t>(input_dim) +
           static_cast<std::size_t>(std::max(depth - 2, 0)) * m * m + m;
}

void FcTopology::validate() const {
    if (depth < 2) throw ConfigError("FC depth must be at least 2");
    if (width < 1) throw ConfigError("FC width must be at least 1");
    if (input_dim < 1) throw ConfigError("FC input dimension must be at least 1");
}

Vector fc_init_params(const FcTopology& topo, std::uint64_t seed) {
    topo.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector theta(static_cast<Eigen::Index>(topo.param_count()));
    const Eigen::Index out = theta.size() - topo.width;
    const double sd_out = 1.0 / std::sqrt(static_cast<double>(topo.width));
    for (Eigen::Index i = 0; i < out; ++i) theta[i] = normal(rng);
    for (Eigen::Index i = out; i < theta.size(); ++i) theta[i] = sd_out * normal(rng);
    return theta;
}

namespace {

// Views into the flat vector and a reusable per-sample workspace.
struct FcNet {
    const FcTopology& topo;
    int m;
    double scale;
    std::vector<Eigen::Map<const Matrix>> w; // W^1 .. W^D
    Eigen::Map<const Vector> w_out;
    std::vector<Eigen::Index> offsets;

    FcNet(const Vector& theta, const FcTopology& t)
        : topo(checked(theta, t)), m(t.width), scale(1.0 / std::sqrt(double(t.width))),
          w_out(theta.data() + theta.size() - t.width, t.width) {
        Eigen::Index pos = 0;
        for (int l = 0; l < t.hidden_layers(); ++l) {
            const int cols = l == 0 ? t.input_dim : m;
            offsets.push_back(pos);
            w.emplace_back(theta.data() + pos, m, cols);
            pos += Eigen::Index(m) * cols;
        }
        offsets.push_back(pos);
    }

    static const FcTopology& checked(const Vector& theta, const FcTopology& t) {
        t.validate();
        if (static_cast<std::size_t>(theta.size()) != t.param_count())
            throw DimensionError("FC parameter vector has " + std::to_string(theta.size()) +
                                 " entries, topology needs " + std::to_string(t.param_count()));
        return t;
    }
};

struct FcWork {
    std::vector<Vector> pre, h;
    Vector delta;
    std::vector<Eigen::Index> nz;

    explicit FcWork(const FcNet& net)
        : pre(std::size_t(net.topo.hidden_layers()), Vector(net.m)),
          h(std::size_t(net.topo.hidden_layers()), Vector(net.m)), delta(net.m) {}
};

// Forward pass; x's nonzero positions are left in work.nz.
double fc_forward(const FcNet& net, const Vector& x, FcWork& work) {
    if (x.size() != net.topo.input_dim)
        throw DimensionError("FC input has length " + std::to_string(x.size()) + ", expected " +
                             std::to_string(net.topo.input_dim));
    work.nz.clear();
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) work.nz.push_back(i);
    const Activation act = net.topo.activation;
    for (int l = 0; l < net.topo.hidden_layers(); ++l) {
        Vector& z = work.pre[std::size_t(l)];
        if (l == 0) {
            z.setZero();
            for (Eigen::Index j : work.nz) z.noalias() += x[j] * net.w[0].col(j);
        } else {
            z.noalias() = net.w[std::size_t(l)] * work.h[std::size_t(l - 1)];
        }
        Vector& h = work.h[std::size_t(l)];
        for (int r = 0; r < net.m; ++r) h[r] = net.scale * activate(act, z[r]);
        if (!h.allFinite())
            throw NumericError("non-finite value in FC layer " + std::to_string(l + 1));
    }
    return net.scale * net.w_out.dot(work.h.back());
}

// Adds weight * grad f(x) into `gradient` (dense, flat order). Needs the
// forward state of x in `work`.
void fc_backward(const FcNet& net, const Vector& x, double weight, FcWork& work,
                 Vector& gradient) {
    const int D = net.topo.hidden_layers();
    const Activation act = net.topo.activation;
    gradient.segment(net.offsets.back(), net.m).noalias() += (weight * net.scale) * work.h.back();
    work.delta = (weight * net.scale) * net.w_out;
    for (int l = D - 1; l >= 0; --l) {
        const Vector& z = work.pre[std::size_t(l)];
        for (int r = 0; r < net.m; ++r)
            work.delta[r] *= net.scale * activate_derivative(act, z[r]);
        double* g = gradient.data() + net.offsets[std::size_t(l)];
        if (l == 0) {
            for (Eigen::Index j : work.nz)
                Eigen::Map<Vector>(g + j * net.m, net.m).noalias() += x[j] * work.delta;
        } else {
            Eigen::Map<Matrix>(g, net.m, net.m).noalias() +=
                work.delta * work.h[std::size_t(l - 1)].transpose();
            work.delta = net.w[std::size_t(l)].transpose() * work.delta;
        }
    }
}

constexpr std::size_t kSamplesPerLane = 64;

std::vector<std::size_t> all_or(std::span<const std::size_t> indices, std::size_t n) {
    if (!indices.empty()) return {indices.begin(), indices.end()};
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

void check_samples(std::span<const Vector> contexts, std::span<const double> rewards) {
    if (contexts.size() != rewards.size())
        throw DimensionError("FC training: contexts and rewards differ in length");
    if (contexts.empty()) throw EmptyHistoryError("FC training: empty history");
}

} // namespace

double fc_predict(const Vector& x, const Vector& theta, const FcTopology& topo) {
    const FcNet net(theta, topo);
    FcWork work(net);
    return fc_forward(net, x, work);
}

double fc_forward_gradient(const Vector& x, const Vector& theta, const FcTopology& topo,
                           Vector& gradient) {
    const FcNet net(theta, topo);
    FcWork work(net);
    const double f = fc_forward(net, x, work);
    gradient = Vector::Zero(theta.size());
    fc_backward(net, x, 1.0, work, gradient);
    return f;
}

FcOutput fc_forward_gradient(const Vector& x, const Vector& theta, const FcTopology& topo) {
    FcOutput out;
    out.output = fc_forward_gradient(x, theta, topo, out.gradient.flat);
    const FcNet net(theta, topo);
    for (std::size_t l = 0; l < net.offsets.size(); ++l) {
        const Eigen::Index end =
            l + 1 < net.offsets.size() ? net.offsets[l + 1] : out.gradient.flat.size();
        out.gradient.per_layer_norms.push_back(
            out.gradient.flat.segment(net.offsets[l], end - net.offsets[l]).norm());
    }
    return out;
}

double fc_loss_gradient(const Vector& theta, const FcTopology& topo,
                        std::span<const Vector> contexts, std::span<const double> rewards,
                        std::span<const std::size_t> indices, Vector& gradient) {
    check_samples(contexts, rewards);
    const FcNet net(theta, topo);
    const auto idx = all_or(indices, contexts.size());
    // Fixed lane count and sample-to-lane map keep sums independent of threads.
    // Each lane owns a dense gradient, so small batches get fewer lanes.
    const int lanes = static_cast<int>(
        std::min<std::size_t>(kernels::kWorkLanes, (idx.size() + kSamplesPerLane - 1) / kSamplesPerLane));
    std::vector<Vector> lane_grad(static_cast<std::size_t>(lanes));
    std::vector<double> lane_loss(std::size_t(lanes), 0.0);
#pragma omp parallel for schedule(static, 1)
    for (int lane = 0; lane < lanes; ++lane) {
        FcWork work(net);
        Vector& g = lane_grad[std::size_t(lane)];
        g = Vector::Zero(theta.size());
        for (std::size_t i = std::size_t(lane); i < idx.size(); i += std::size_t(lanes)) {
            const Vector& x = contexts[idx[i]];
            const double resid = fc_forward(net, x, work) - rewards[idx[i]];
            lane_loss[std::size_t(lane)] += 0.5 * resid * resid;
            fc_backward(net, x, resid, work, g);
        }
    }
    gradient = std::move(lane_grad[0]);
    double loss = lane_loss[0];
    for (int lane = 1; lane < lanes; ++lane) {
        gradient += lane_grad[std::size_t(lane)];
        loss += lane_loss[std::size_t(lane)];
    }
    return loss;
}

double fc_loss_gradient_reference(const Vector& theta, const FcTopology& topo,
                                  std::span<const Vector> contexts,
                                  std::span<const double> rewards,
                                  std::span<const std::size_t> indices, Vector& gradient) {
    check_samples(contexts, rewards);
    gradient = Vector::Zero(theta.size());
    double loss = 0.0;
    Vector g;
    for (std::size_t i : all_or(indices, contexts.size())) {
        const double resid = fc_forward_gradient(contexts[i], theta, topo, g) - rewards[i];
        loss += 0.5 * resid * resid;
        gradient += resid * g;
    }
    return loss;
}

Vector fc_train_gd(const Vector& start, std::span<const Vector> contexts,
                   std::span<const double> rewards, double eta, std::size_t k,
                   const FcTopology& topo, const TrainOptions& options) {
    if (!(eta > 0)) throw ConfigError("fc_train_gd: eta must be positive");
    if (k == 0) return start;
    check_samples(contexts, rewards);
    Vector theta = start;
    Vector g;
    for (std::size_t step = 0; step < k; ++step) {
        const auto idx =
            minibatch_indices(contexts.size(), options.batch_size, options.batch_seed, step);
        double loss = 0.0;
        try {
            loss = fc_loss_gradient(theta, topo, contexts, rewards, idx, g);
        } catch (const NumericError& e) {
            throw DivergedError(step + 1, "fc_train_gd diverged at iteration " +
                                              std::to_string(step + 1) + ": " + e.what());
        }
        if (!std::isfinite(loss) || !g.allFinite())
            throw DivergedError(step + 1, "fc_train_gd diverged at iteration " +
                                              std::to_string(step + 1));
        if (options.loss_trace) options.loss_trace->push_back(loss);
        theta.noalias() -= eta * g;
    }
    return theta;
}

} // namespace cnnucb
