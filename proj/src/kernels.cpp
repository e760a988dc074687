#include "cnnucb/kernels.hpp"

#include "cnnucb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cnnucb::kernels {

namespace {

void fill_active(const ArmContext& x, std::vector<int>& active) {
    active.clear();
    for (Eigen::Index ch = 0; ch < x.rows(); ++ch)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            if (x(ch, j) != 0.0) {
                active.push_back(static_cast<int>(ch));
                break;
            }
}

} // namespace

std::vector<int> active_channels(const ArmContext& x) {
    std::vector<int> active;
    fill_active(x, active);
    return active;
}

namespace {

struct Context {
    const CnnParams& params;
    const NetTopology& topo;
    std::vector<int> table;
    int m, q, p, layers;
    double scale, out_scale;
    // Per hidden layer l >= 1: wt[l](ch, s*m + r) = W_l(r, ch*q + s), so the
    // backward scatter reads contiguous channel vectors.
    std::vector<Matrix> wt;
    // Slots reading pixel i: inverse[inverse_start[i] .. inverse_start[i+1]) as (j, s).
    std::vector<int> inverse_start;
    std::vector<std::pair<int, int>> inverse;

    Context(const CnnParams& prm, const NetTopology& t)
        : params(prm), topo(t), table(patch_table(t)), m(t.channels), q(t.patch),
          p(t.pixels()), layers(t.layers),
          scale(1.0 / std::sqrt(static_cast<double>(t.patch) * t.channels)),
          out_scale(1.0 / std::sqrt(static_cast<double>(t.channels))) {
        inverse_start.assign(static_cast<std::size_t>(p) + 1, 0);
        for (int src : table)
            if (src >= 0) ++inverse_start[static_cast<std::size_t>(src) + 1];
        for (int i = 0; i < p; ++i)
            inverse_start[static_cast<std::size_t>(i) + 1] += inverse_start[static_cast<std::size_t>(i)];
        inverse.resize(static_cast<std::size_t>(inverse_start.back()));
        std::vector<int> fill(inverse_start.begin(), inverse_start.end() - 1);
        for (int j = 0; j < p; ++j)
            for (int s = 0; s < q; ++s) {
                const int src = table[static_cast<std::size_t>(j) * q + s];
                if (src >= 0) inverse[static_cast<std::size_t>(fill[static_cast<std::size_t>(src)]++)] = {j, s};
            }
        wt.resize(static_cast<std::size_t>(layers));
        for (int l = 1; l < layers; ++l) {
            const auto w = params.layer(l);
            Matrix& out = wt[static_cast<std::size_t>(l)];
            out.resize(m, static_cast<Eigen::Index>(q) * m);
            for (int s = 0; s < q; ++s)
                for (int r = 0; r < m; ++r)
                    for (int ch = 0; ch < m; ++ch)
                        out(ch, static_cast<Eigen::Index>(s) * m + r) =
                            w(r, static_cast<Eigen::Index>(ch) * q + s);
        }
    }
};

// Buffers reused across chunks; contents never influence results.
struct Workspace {
    Matrix input;               // c x (B*p), the chunk's arms side by side
    std::vector<Matrix> pre;    // per layer: m x (B*p)
    std::vector<Matrix> hidden; // per layer: m x (B*p)
    Matrix delta_h, delta_pre, delta_prev;
    std::vector<std::vector<int>> active;
    std::vector<int> runs;
    std::vector<double> lane_buffer;
    std::vector<double> zeros; // stands in for padding pixels
};

void activate_into(const Context& ctx, const Matrix& pre, Matrix& h) {
    if (ctx.topo.activation == Activation::sigmoid) {
        h = (ctx.scale * (1.0 + (-pre.array()).exp()).inverse()).matrix();
    } else {
        h = (ctx.scale * (pre.array().max(0.0) + (-pre.array().abs()).exp().log1p())).matrix();
    }
}

// delta_pre = delta_h .* scale * sigma'(pre)
void backprop_mask(const Context& ctx, const Matrix& pre, const Matrix& h, const Matrix& delta_h,
                   Matrix& delta_pre) {
    if (ctx.topo.activation == Activation::sigmoid) {
        const auto s = h.array() / ctx.scale;
        delta_pre = (delta_h.array() * (ctx.scale * s * (1.0 - s))).matrix();
    } else {
        delta_pre =
            (delta_h.array() * (ctx.scale * (1.0 + (-pre.array()).exp()).inverse())).matrix();
    }
}

// Four m-wide accumulators. With M > 0 the width is a compile-time constant
// and the arrays live in registers; M = 0 is the any-width fallback.
template <int M>
struct Lanes {
    double a0[M], a1[M], a2[M], a3[M];
    Lanes(int, std::vector<double>&) {}
};
template <>
struct Lanes<0> {
    double *a0, *a1, *a2, *a3;
    Lanes(int m, std::vector<double>& buf) {
        buf.resize(static_cast<std::size_t>(4 * m));
        a0 = buf.data();
        a1 = a0 + m;
        a2 = a1 + m;
        a3 = a2 + m;
    }
};

template <int M>
inline void zero(Lanes<M>& l, int m) {
#pragma omp simd
    for (int r = 0; r < m; ++r) l.a0[r] = l.a1[r] = l.a2[r] = l.a3[r] = 0.0;
}

template <int M>
inline int width(const Context& ctx) {
    return M > 0 ? M : ctx.m;
}

// Layer pre-activation for samples [b0, b1) of the chunk:
// pre(:, col j) = sum_{ch in channels, s} W(:, ch*q + s) * in(ch, source of slot s).
// Four output pixels share each weight load.
// `channels` empty means every row of `in`, with a compile-time count when M > 0.
template <int M, typename Body>
inline void for_channels(const std::vector<int>& channels, int rows, Body&& body) {
    if (!channels.empty()) {
        for (int ch : channels) body(ch);
    } else if constexpr (M > 0) {
        for (int ch = 0; ch < M; ++ch) body(ch);
    } else {
        for (int ch = 0; ch < rows; ++ch) body(ch);
    }
}

template <int M>
void conv_forward(const Context& ctx, const double* w, const Matrix& in,
                  const std::vector<int>& channels, int b0, int b1, Matrix& pre,
                  Workspace& ws) {
    const int m = width<M>(ctx), q = ctx.q, p = ctx.p;
    const Eigen::Index rows = in.rows();
    const double* zeros = ws.zeros.data();
    Lanes<M> acc(m, ws.lane_buffer);
    for (int b = b0; b < b1; ++b) {
        const double* x = in.data() + static_cast<Eigen::Index>(b) * p * rows;
        double* out = pre.data() + static_cast<Eigen::Index>(b) * p * m;
        for (int j0 = 0; j0 < p; j0 += 4) {
            const int n = std::min(4, p - j0);
            zero(acc, m);
            for (int s = 0; s < q; ++s) {
                const double* c[4];
                for (int k = 0; k < 4; ++k) {
                    const int src = k < n ? ctx.table[static_cast<std::size_t>(j0 + k) * q + s] : -1;
                    c[k] = src < 0 ? zeros : x + src * rows;
                }
                for_channels<M>(channels, static_cast<int>(rows), [&](int ch) {
                    const double* wc = w + (static_cast<Eigen::Index>(ch) * q + s) * m;
                    const double v0 = c[0][ch], v1 = c[1][ch], v2 = c[2][ch], v3 = c[3][ch];
#pragma omp simd
                    for (int r = 0; r < m; ++r) {
                        acc.a0[r] += wc[r] * v0;
                        acc.a1[r] += wc[r] * v1;
                        acc.a2[r] += wc[r] * v2;
                        acc.a3[r] += wc[r] * v3;
                    }
                });
            }
            const double* lanes[4] = {acc.a0, acc.a1, acc.a2, acc.a3};
            for (int k = 0; k < n; ++k)
                std::copy(lanes[k], lanes[k] + m, out + static_cast<Eigen::Index>(j0 + k) * m);
        }
    }
}

// grad(:, ch*q + s) += sum over samples [b0, b1) and pixels j of
// delta_pre(:, j) * in(ch, source of slot s at j), four pixels per update.
template <int M>
void conv_weight_grad(const Context& ctx, const Matrix& delta_pre, const Matrix& in,
                      const std::vector<int>& channels, int b0, int b1, double* grad,
                      Workspace& ws) {
    const int m = width<M>(ctx), q = ctx.q, p = ctx.p;
    const Eigen::Index rows = in.rows();
    const double* zeros = ws.zeros.data();
    for (int b = b0; b < b1; ++b) {
        const double* x = in.data() + static_cast<Eigen::Index>(b) * p * rows;
        const double* dp = delta_pre.data() + static_cast<Eigen::Index>(b) * p * m;
        for (int j0 = 0; j0 < p; j0 += 4) {
            const int n = std::min(4, p - j0);
            const double* d[4];
            for (int k = 0; k < 4; ++k) d[k] = dp + static_cast<Eigen::Index>(k < n ? j0 + k : j0) * m;
            for (int s = 0; s < q; ++s) {
                const double* c[4];
                for (int k = 0; k < 4; ++k) {
                    const int src = k < n ? ctx.table[static_cast<std::size_t>(j0 + k) * q + s] : -1;
                    c[k] = src < 0 ? zeros : x + src * rows;
                }
                for_channels<M>(channels, static_cast<int>(rows), [&](int ch) {
                    double* g = grad + (static_cast<Eigen::Index>(ch) * q + s) * m;
                    const double v0 = c[0][ch], v1 = c[1][ch], v2 = c[2][ch], v3 = c[3][ch];
#pragma omp simd
                    for (int r = 0; r < m; ++r)
                        g[r] += (d[0][r] * v0 + d[1][r] * v1) + (d[2][r] * v2 + d[3][r] * v3);
                });
            }
        }
    }
}

// delta_prev = phi^T(W^T delta_pre) for every sample of the chunk, gathered
// per source pixel.
template <int M>
void conv_input_grad(const Context& ctx, const Matrix& wt, const Matrix& delta_pre, int samples,
                     Matrix& delta_prev, Workspace& ws) {
    const int m = width<M>(ctx), p = ctx.p;
    const int m4 = m - m % 4;
    Lanes<M> acc(m, ws.lane_buffer);
    delta_prev.resize(m, static_cast<Eigen::Index>(samples) * p);
    for (int b = 0; b < samples; ++b) {
        const double* dp = delta_pre.data() + static_cast<Eigen::Index>(b) * p * m;
        double* out = delta_prev.data() + static_cast<Eigen::Index>(b) * p * m;
        for (int i = 0; i < p; ++i) {
            zero(acc, m);
            for (int e = ctx.inverse_start[static_cast<std::size_t>(i)];
                 e < ctx.inverse_start[static_cast<std::size_t>(i) + 1]; ++e) {
                const auto [j, s] = ctx.inverse[static_cast<std::size_t>(e)];
                const double* d = dp + static_cast<Eigen::Index>(j) * m;
                const double* ws = wt.data() + static_cast<Eigen::Index>(s) * m * m;
                int r = 0;
                for (; r < m4; r += 4) {
                    const double* w0 = ws + static_cast<Eigen::Index>(r) * m;
                    const double d0 = d[r], d1 = d[r + 1], d2 = d[r + 2], d3 = d[r + 3];
#pragma omp simd
                    for (int ch = 0; ch < m; ++ch) {
                        acc.a0[ch] += w0[ch] * d0;
                        acc.a1[ch] += w0[m + ch] * d1;
                        acc.a2[ch] += w0[2 * m + ch] * d2;
                        acc.a3[ch] += w0[3 * m + ch] * d3;
                    }
                }
                for (; r < m; ++r) {
                    const double* w0 = ws + static_cast<Eigen::Index>(r) * m;
                    const double d0 = d[r];
#pragma omp simd
                    for (int ch = 0; ch < m; ++ch) acc.a0[ch] += w0[ch] * d0;
                }
            }
            double* o = out + static_cast<Eigen::Index>(i) * m;
#pragma omp simd
            for (int ch = 0; ch < m; ++ch)
                o[ch] = (acc.a0[ch] + acc.a1[ch]) + (acc.a2[ch] + acc.a3[ch]);
        }
    }
}

// One chunk of samples. Adds sum_b weight_b * g(x_b) into `grad`, where
// weight_b = f_b - reward_b (rewards given) or 1, and the squared errors into
// `loss`. Outputs f_b go to `outputs` when non-null.
template <int M>
void run_chunk(const Context& ctx, std::span<const ArmContext* const> xs, const double* rewards,
               Workspace& ws, double& loss, double* grad, double* outputs) {
    const int m = ctx.m, p = ctx.p, layers = ctx.layers;
    const int samples = static_cast<int>(xs.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(samples) * p;
    ws.pre.resize(static_cast<std::size_t>(layers));
    ws.hidden.resize(static_cast<std::size_t>(layers));
    ws.active.resize(static_cast<std::size_t>(samples));

    ws.zeros.assign(static_cast<std::size_t>(std::max(m, ctx.topo.in_channels)), 0.0);
    ws.input.resize(ctx.topo.in_channels, cols);
    for (int b = 0; b < samples; ++b) {
        const ArmContext& x = *xs[static_cast<std::size_t>(b)];
        ws.input.middleCols(static_cast<Eigen::Index>(b) * p, p) = x;
        fill_active(x, ws.active[static_cast<std::size_t>(b)]);
    }

    // runs of consecutive samples with identical active input channels
    ws.runs.clear();
    for (int b = 0; b < samples; ++b)
        if (b == 0 || ws.active[static_cast<std::size_t>(b)] != ws.active[static_cast<std::size_t>(b - 1)])
            ws.runs.push_back(b);
    ws.runs.push_back(samples);

    ws.pre[0].resize(m, cols);
    const double* w1 = ctx.params.layer(0).data();
    for (std::size_t k = 0; k + 1 < ws.runs.size(); ++k)
        conv_forward<M>(ctx, w1, ws.input, ws.active[static_cast<std::size_t>(ws.runs[k])],
                        ws.runs[k], ws.runs[k + 1], ws.pre[0], ws);
    activate_into(ctx, ws.pre[0], ws.hidden[0]);
    for (int l = 1; l < layers; ++l) {
        const auto li = static_cast<std::size_t>(l);
        ws.pre[li].resize(m, cols);
        conv_forward<M>(ctx, ctx.params.layer(l).data(), ws.hidden[li - 1], {}, 0, samples,
                        ws.pre[li], ws);
        activate_into(ctx, ws.pre[li], ws.hidden[li]);
    }
    const Matrix& top = ws.hidden.back();
    if (!top.allFinite())
        throw NumericError("non-finite value in layer " + std::to_string(layers));

    const auto w_out = ctx.params.layer(layers);
    ws.delta_h.resize(m, cols);
    Eigen::Map<Matrix> g_out(grad + ctx.params.layer_offset(layers), m, p);
    for (int b = 0; b < samples; ++b) {
        const auto block = top.middleCols(static_cast<Eigen::Index>(b) * p, p);
        const double f = ctx.out_scale * w_out.cwiseProduct(block).sum();
        if (!std::isfinite(f))
            throw NumericError("non-finite value in layer " + std::to_string(layers + 1));
        if (outputs) outputs[b] = f;
        double weight = 1.0;
        if (rewards) {
            weight = f - rewards[b];
            loss += 0.5 * weight * weight;
        }
        g_out.noalias() += (weight * ctx.out_scale) * block;
        ws.delta_h.middleCols(static_cast<Eigen::Index>(b) * p, p) =
            (weight * ctx.out_scale) * w_out;
    }

    for (int l = layers - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        backprop_mask(ctx, ws.pre[li], ws.hidden[li], ws.delta_h, ws.delta_pre);
        double* gl = grad + ctx.params.layer_offset(l);
        if (l == 0) {
            for (std::size_t k = 0; k + 1 < ws.runs.size(); ++k)
                conv_weight_grad<M>(ctx, ws.delta_pre, ws.input,
                                    ws.active[static_cast<std::size_t>(ws.runs[k])], ws.runs[k],
                                    ws.runs[k + 1], gl, ws);
        } else {
            conv_weight_grad<M>(ctx, ws.delta_pre, ws.hidden[li - 1], {}, 0, samples, gl,
                                ws);
            conv_input_grad<M>(ctx, ctx.wt[li], ws.delta_pre, samples, ws.delta_prev,
                               ws);
            std::swap(ws.delta_h, ws.delta_prev);
        }
    }
}

using ChunkFn = void (*)(const Context&, std::span<const ArmContext* const>, const double*,
                         Workspace&, double&, double*, double*);

ChunkFn chunk_kernel(int m) {
    switch (m) {
    case 4: return &run_chunk<4>;
    case 8: return &run_chunk<8>;
    case 16: return &run_chunk<16>;
    case 20: return &run_chunk<20>;
    default: return &run_chunk<0>;
    }
}

void check_arm(const ArmContext& x, const NetTopology& topo) {
    if (x.rows() != topo.in_channels || x.cols() != topo.pixels())
        throw DimensionError("arm shape does not match topology");
}

} // namespace

LossGradient loss_gradient(const CnnParams& params, const NetTopology& topo,
                           const TrainingHistory& history, std::span<const std::size_t> indices) {
    if (history.empty()) throw EmptyHistoryError("loss_gradient: empty training history");
    if (params.size() != topo.param_count())
        throw DimensionError("parameter vector does not match topology");
    const Context ctx(params, topo);
    const ChunkFn kernel = chunk_kernel(ctx.m);

    std::vector<std::size_t> all;
    if (indices.empty()) {
        all.resize(history.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        indices = all;
    }
    for (std::size_t i : indices) check_arm(history.context(i), topo);

    // Chunk c covers samples [c * per_chunk, ...) and goes to lane c % lanes.
    const std::size_t per_chunk = std::max(1, kChunkColumns / ctx.p);
    const std::size_t chunks = (indices.size() + per_chunk - 1) / per_chunk;
    const int lanes = std::min<int>(kWorkLanes, static_cast<int>(chunks));
    const auto d = static_cast<Eigen::Index>(params.size());
    std::vector<Vector> lane_grad(static_cast<std::size_t>(lanes), Vector::Zero(d));
    std::vector<double> lane_loss(static_cast<std::size_t>(lanes), 0.0);
    std::vector<std::string> lane_error(static_cast<std::size_t>(lanes));

#pragma omp parallel for schedule(dynamic, 1)
    for (int lane = 0; lane < lanes; ++lane) {
        Workspace ws;
        std::vector<const ArmContext*> xs;
        std::vector<double> rewards;
        const auto li = static_cast<std::size_t>(lane);
        try {
            for (std::size_t c = li; c < chunks; c += static_cast<std::size_t>(lanes)) {
                const std::size_t end = std::min(indices.size(), (c + 1) * per_chunk);
                xs.clear();
                rewards.clear();
                for (std::size_t n = c * per_chunk; n < end; ++n) {
                    xs.push_back(&history.context(indices[n]));
                    rewards.push_back(history.reward(indices[n]));
                }
                kernel(ctx, xs, rewards.data(), ws, lane_loss[li], lane_grad[li].data(), nullptr);
            }
        } catch (const std::exception& e) {
            lane_error[li] = e.what();
        }
    }
    for (const auto& err : lane_error)
        if (!err.empty()) throw NumericError(err);

    LossGradient out{0.0, Vector::Zero(d)};
    for (int lane = 0; lane < lanes; ++lane) {
        out.loss += lane_loss[static_cast<std::size_t>(lane)];
        out.gradient += lane_grad[static_cast<std::size_t>(lane)];
    }
    return out;
}

LossGradient loss_gradient_reference(const CnnParams& params, const NetTopology& topo,
                                     const TrainingHistory& history,
                                     std::span<const std::size_t> indices) {
    if (history.empty()) throw EmptyHistoryError("loss_gradient: empty training history");
    LossGradient out{0.0, Vector::Zero(static_cast<Eigen::Index>(params.size()))};
    Vector g;
    auto add = [&](std::size_t i) {
        const double f = network_gradient(history.context(i), params, topo, g);
        const double e = f - history.reward(i);
        out.loss += 0.5 * e * e;
        out.gradient += e * g;
    };
    if (indices.empty())
        for (std::size_t i = 0; i < history.size(); ++i) add(i);
    else
        for (std::size_t i : indices) add(i);
    return out;
}

void outputs_and_gradients(const CnnParams& params, const NetTopology& topo,
                           std::span<const ArmContext> arms, Vector& outputs, Matrix& gradients) {
    if (params.size() != topo.param_count())
        throw DimensionError("parameter vector does not match topology");
    const Context ctx(params, topo);
    const ChunkFn kernel = chunk_kernel(ctx.m);
    const auto n = static_cast<Eigen::Index>(arms.size());
    outputs.resize(n);
    gradients.setZero(static_cast<Eigen::Index>(params.size()), n);
    for (const auto& x : arms) check_arm(x, topo);
    std::vector<std::string> errors(arms.size());

#pragma omp parallel
    {
        Workspace ws;
#pragma omp for schedule(dynamic, 1)
        for (Eigen::Index i = 0; i < n; ++i) {
            const ArmContext* x = &arms[static_cast<std::size_t>(i)];
            double unused = 0.0;
            try {
                kernel(ctx, std::span<const ArmContext* const>(&x, 1), nullptr, ws, unused,
                       gradients.col(i).data(), outputs.data() + i);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(i)] = e.what();
            }
        }
    }
    for (const auto& err : errors)
        if (!err.empty()) throw NumericError(err);
}

void outputs_and_gradients_reference(const CnnParams& params, const NetTopology& topo,
                                     std::span<const ArmContext> arms, Vector& outputs,
                                     Matrix& gradients) {
    const auto n = static_cast<Eigen::Index>(arms.size());
    outputs.resize(n);
    gradients.resize(static_cast<Eigen::Index>(params.size()), n);
    Vector g;
    for (Eigen::Index i = 0; i < n; ++i) {
        outputs[i] = network_gradient(arms[static_cast<std::size_t>(i)], params, topo, g);
        gradients.col(i) = g;
    }
}

} // namespace cnnucb::kernels
