#include "cnnucb/cnn.hpp"

#include "cnnucb/errors.hpp"
#include "cnnucb/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace cnnucb {

Matrix extract_patches(const Matrix& h, const NetTopology& topo) {
    return extract_patches(h, topo, patch_table(topo));
}

Matrix extract_patches(const Matrix& h, const NetTopology& topo, const std::vector<int>& table) {
    const int p = topo.pixels();
    const int q = topo.patch;
    if (h.cols() != p)
        throw DimensionError("extract_patches: input has " + std::to_string(h.cols()) +
                             " columns, topology has " + std::to_string(p) + " pixels");
    const auto rows = static_cast<int>(h.rows());
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(q) * rows, p);
    for (int j = 0; j < p; ++j)
        for (int s = 0; s < q; ++s) {
            const int src = table[static_cast<std::size_t>(j) * q + s];
            if (src < 0) continue;
            for (int ch = 0; ch < rows; ++ch) out(ch * q + s, j) = h(ch, src);
        }
    return out;
}

Matrix scatter_patches(const Matrix& u, int rows, const NetTopology& topo) {
    return scatter_patches(u, rows, topo, patch_table(topo));
}

Matrix scatter_patches(const Matrix& u, int rows, const NetTopology& topo,
                       const std::vector<int>& table) {
    const int p = topo.pixels();
    const int q = topo.patch;
    if (u.cols() != p || u.rows() != static_cast<Eigen::Index>(q) * rows)
        throw DimensionError("scatter_patches: shape mismatch");
    Matrix h = Matrix::Zero(rows, p);
    for (int j = 0; j < p; ++j)
        for (int s = 0; s < q; ++s) {
            const int src = table[static_cast<std::size_t>(j) * q + s];
            if (src < 0) continue;
            for (int ch = 0; ch < rows; ++ch) h(ch, src) += u(ch * q + s, j);
        }
    return h;
}

std::vector<std::pair<int, int>> layer_shapes(const NetTopology& topo) {
    const int m = topo.channels;
    const int q = topo.patch;
    std::vector<std::pair<int, int>> shapes;
    shapes.emplace_back(m, q * topo.in_channels);
    for (int l = 1; l < topo.layers; ++l) shapes.emplace_back(m, q * m);
    shapes.emplace_back(m, topo.pixels());
    return shapes;
}

CnnParams::CnnParams(const NetTopology& topo, Vector flat)
    : flat_(std::move(flat)), shapes_(layer_shapes(topo)) {
    int offset = 0;
    for (const auto& [r, c] : shapes_) {
        offsets_.push_back(offset);
        offset += r * c;
    }
    if (flat_.size() != offset)
        throw DimensionError("CnnParams: expected " + std::to_string(offset) +
                             " parameters, got " + std::to_string(flat_.size()));
}

CnnParams CnnParams::zeros(const NetTopology& topo) {
    return CnnParams(topo, Vector::Zero(static_cast<Eigen::Index>(topo.param_count())));
}

CnnParams::LayerView CnnParams::layer(int l) const {
    const auto& [r, c] = shapes_[static_cast<std::size_t>(l)];
    return LayerView(flat_.data() + offsets_[static_cast<std::size_t>(l)], r, c);
}

void TrainingHistory::append(ArmContext x, double reward) {
    contexts_.push_back(std::move(x));
    rewards_.push_back(reward);
}

CnnParams init_params(const NetTopology& topo, std::uint64_t seed) {
    topo.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector flat(static_cast<Eigen::Index>(topo.param_count()));
    const auto shapes = layer_shapes(topo);
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const double sd = (l + 1 == shapes.size()) ? 1.0 / std::sqrt(topo.channels) : 1.0;
        const Eigen::Index n = static_cast<Eigen::Index>(shapes[l].first) * shapes[l].second;
        for (Eigen::Index i = 0; i < n; ++i) flat[pos++] = sd * normal(rng);
    }
    return CnnParams(topo, std::move(flat));
}

namespace {

void check_input(const ArmContext& x, const CnnParams& params, const NetTopology& topo) {
    if (x.rows() != topo.in_channels || x.cols() != topo.pixels())
        throw DimensionError("arm is " + std::to_string(x.rows()) + "x" +
                             std::to_string(x.cols()) + ", topology expects " +
                             std::to_string(topo.in_channels) + "x" +
                             std::to_string(topo.pixels()));
    if (params.size() != topo.param_count() || params.layer_count() != topo.layers + 1)
        throw DimensionError("parameter vector does not match topology");
}

void check_finite(const Matrix& v, int layer) {
    if (!v.allFinite())
        throw NumericError("non-finite value in layer " + std::to_string(layer));
}

} // namespace

ForwardTrace forward(const ArmContext& x, const CnnParams& params, const NetTopology& topo) {
    check_input(x, params, topo);
    const auto table = patch_table(topo);
    const double scale = 1.0 / std::sqrt(static_cast<double>(topo.patch) * topo.channels);
    ForwardTrace trace;
    const Matrix* prev = &x;
    for (int l = 0; l < topo.layers; ++l) {
        Matrix pre = params.layer(l) * extract_patches(*prev, topo, table);
        check_finite(pre, l + 1);
        Matrix h = pre.unaryExpr([&](double z) { return scale * activate(topo.activation, z); });
        trace.preactivations.push_back(std::move(pre));
        trace.layers.push_back(std::move(h));
        prev = &trace.layers.back();
    }
    trace.output = params.layer(topo.layers).cwiseProduct(trace.layers.back()).sum() /
                   std::sqrt(static_cast<double>(topo.channels));
    if (!std::isfinite(trace.output))
        throw NumericError("non-finite value in layer " + std::to_string(topo.layers + 1));
    return trace;
}

double predict(const ArmContext& x, const CnnParams& params, const NetTopology& topo) {
    return forward(x, params, topo).output;
}

double network_gradient(const ArmContext& x, const CnnParams& params, const NetTopology& topo,
                        Vector& gradient) {
    const ForwardTrace trace = forward(x, params, topo);
    const auto table = patch_table(topo);
    const int m = topo.channels;
    const double scale = 1.0 / std::sqrt(static_cast<double>(topo.patch) * m);
    const double out_scale = 1.0 / std::sqrt(static_cast<double>(m));
    gradient.resize(static_cast<Eigen::Index>(params.size()));

    const int top = topo.layers;
    Eigen::Map<Matrix>(gradient.data() + params.layer_offset(top), m, topo.pixels()) =
        trace.layers.back() * out_scale;

    // df/dh^L, then walk down through sigma' masks and the transposed patch operator.
    Matrix delta_h = params.layer(top) * out_scale;
    for (int l = top - 1; l >= 0; --l) {
        const Matrix& pre = trace.preactivations[static_cast<std::size_t>(l)];
        const Matrix delta_pre = delta_h.cwiseProduct(pre.unaryExpr(
            [&](double z) { return scale * activate_derivative(topo.activation, z); }));
        const Matrix& input = l == 0 ? x : trace.layers[static_cast<std::size_t>(l - 1)];
        const Matrix patches = extract_patches(input, topo, table);
        Eigen::Map<Matrix>(gradient.data() + params.layer_offset(l), params.layer_rows(l),
                           params.layer_cols(l)) = delta_pre * patches.transpose();
        if (l > 0)
            delta_h = scatter_patches(params.layer(l).transpose() * delta_pre, m, topo, table);
    }
    if (!gradient.allFinite()) throw NumericError("non-finite gradient");
    return trace.output;
}

GradientVec network_gradient(const ArmContext& x, const CnnParams& params,
                             const NetTopology& topo) {
    GradientVec g;
    network_gradient(x, params, topo, g.flat);
    for (int l = 0; l < params.layer_count(); ++l) {
        const auto n = static_cast<Eigen::Index>(params.layer_rows(l)) * params.layer_cols(l);
        g.per_layer_norms.push_back(g.flat.segment(params.layer_offset(l), n).norm());
    }
    return g;
}

double loss(const TrainingHistory& history, const CnnParams& params, const NetTopology& topo) {
    if (history.empty()) throw EmptyHistoryError("loss: empty training history");
    double total = 0.0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double e = predict(history.context(i), params, topo) - history.reward(i);
        total += 0.5 * e * e;
    }
    return total;
}

std::vector<std::size_t> minibatch_indices(std::size_t history_size, std::size_t batch_size,
                                           std::uint64_t seed, std::size_t step) {
    std::vector<std::size_t> idx(history_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (batch_size == 0 || batch_size >= history_size) return idx;
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (step + 1)));
    // partial Fisher-Yates
    for (std::size_t i = 0; i < batch_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, history_size - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(batch_size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

CnnParams train_gd(const CnnParams& start, const TrainingHistory& history, double eta,
                   std::size_t k, const NetTopology& topo, const TrainOptions& options) {
    if (!(eta > 0)) throw ConfigError("train_gd: eta must be positive");
    if (k == 0) return start;
    if (history.empty()) throw EmptyHistoryError("train_gd: empty training history");
    Vector theta = start.flat();
    for (std::size_t step = 0; step < k; ++step) {
        const auto idx = minibatch_indices(history.size(), options.batch_size,
                                           options.batch_seed, step);
        kernels::LossGradient lg;
        try {
            lg = kernels::loss_gradient(CnnParams(topo, theta), topo, history, idx);
        } catch (const NumericError& e) {
            throw DivergedError(step + 1, "train_gd diverged at iteration " +
                                              std::to_string(step + 1) + ": " + e.what());
        }
        if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
            throw DivergedError(step + 1, "train_gd diverged at iteration " +
                                              std::to_string(step + 1));
        if (options.loss_trace) options.loss_trace->push_back(lg.loss);
        theta.noalias() -= eta * lg.gradient;
    }
    return CnnParams(topo, std::move(theta));
}

std::vector<double> param_distance(const CnnParams& params, const CnnParams& params0) {
    if (!params.same_shape(params0)) throw DimensionError("param_distance: shape mismatch");
    std::vector<double> out;
    for (int l = 0; l < params.layer_count(); ++l)
        out.push_back((params.layer(l) - params0.layer(l)).norm());
    return out;
}

} // namespace cnnucb
