#pragma once

#include "cnnucb/topology.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cnnucb {

// Zero-padded stride-1 patch matrix of an (rows x p) input: (patch * rows) x p,
// row index = channel * patch + offset.
Matrix extract_patches(const Matrix& h, const NetTopology& topo);
Matrix extract_patches(const Matrix& h, const NetTopology& topo, const std::vector<int>& table);

// Adjoint of extract_patches: scatter-adds a (patch * rows) x p matrix back
// onto an rows x p matrix.
Matrix scatter_patches(const Matrix& u, int rows, const NetTopology& topo);
Matrix scatter_patches(const Matrix& u, int rows, const NetTopology& topo,
                       const std::vector<int>& table);

// Network weights theta = (W1, ..., WL, W_out) stored as one flat vector in
// vec() order (column-major per layer, layers in sequence). Immutable.
class CnnParams {
public:
    using LayerView = Eigen::Map<const Matrix>;

    CnnParams() = default;
    // Takes ownership of a flat vector; throws DimensionError on length mismatch.
    CnnParams(const NetTopology& topo, Vector flat);

    static CnnParams zeros(const NetTopology& topo);

    const Vector& flat() const { return flat_; }
    std::size_t size() const { return static_cast<std::size_t>(flat_.size()); }
    // Number of weight matrices, L + 1.
    int layer_count() const { return static_cast<int>(shapes_.size()); }
    // 0-based: layer(0) = W1, layer(L) = W_out (m x p).
    LayerView layer(int l) const;
    int layer_offset(int l) const { return offsets_[static_cast<std::size_t>(l)]; }
    int layer_rows(int l) const { return shapes_[static_cast<std::size_t>(l)].first; }
    int layer_cols(int l) const { return shapes_[static_cast<std::size_t>(l)].second; }

    bool same_shape(const CnnParams& other) const { return shapes_ == other.shapes_; }

private:
    Vector flat_;
    std::vector<std::pair<int, int>> shapes_;
    std::vector<int> offsets_;
};

// Layer shapes (rows, cols) in flat order for a topology.
std::vector<std::pair<int, int>> layer_shapes(const NetTopology& topo);

struct ForwardTrace {
    std::vector<Matrix> layers;         // h^1 .. h^L, each m x p
    std::vector<Matrix> preactivations; // W^l phi(h^{l-1})
    double output = 0.0;
};

struct GradientVec {
    Vector flat;
    std::vector<double> per_layer_norms;
};

// Observed (context, reward) pairs, append-only.
class TrainingHistory {
public:
    void append(ArmContext x, double reward);
    std::size_t size() const { return rewards_.size(); }
    bool empty() const { return rewards_.empty(); }
    const ArmContext& context(std::size_t i) const { return contexts_[i]; }
    double reward(std::size_t i) const { return rewards_[i]; }
    const std::vector<ArmContext>& contexts() const { return contexts_; }
    const std::vector<double>& rewards() const { return rewards_; }

private:
    std::vector<ArmContext> contexts_;
    std::vector<double> rewards_;
};

// W1..WL ~ N(0, 1), W_out ~ N(0, 1/m); bit-identical for equal seeds.
CnnParams init_params(const NetTopology& topo, std::uint64_t seed);

ForwardTrace forward(const ArmContext& x, const CnnParams& params, const NetTopology& topo);

// f(x; theta) only.
double predict(const ArmContext& x, const CnnParams& params, const NetTopology& topo);

GradientVec network_gradient(const ArmContext& x, const CnnParams& params,
                             const NetTopology& topo);

// Output and gradient in one pass.
double network_gradient(const ArmContext& x, const CnnParams& params, const NetTopology& topo,
                        Vector& gradient);

double loss(const TrainingHistory& history, const CnnParams& params, const NetTopology& topo);

struct TrainOptions {
    // 0 = full history every step. Otherwise each step uses a seeded random
    // subset of at most this many samples.
    std::size_t batch_size = 0;
    std::uint64_t batch_seed = 0;
    // When set, receives L(theta^(i-1)) for each step i.
    std::vector<double>* loss_trace = nullptr;
};

// k full-batch gradient steps on (1/2) sum (f - r)^2 starting from `start`.
CnnParams train_gd(const CnnParams& start, const TrainingHistory& history, double eta,
                   std::size_t k, const NetTopology& topo, const TrainOptions& options = {});

// ||W^l - W^l_0||_F per weight matrix.
std::vector<double> param_distance(const CnnParams& params, const CnnParams& params0);

// Indices used by one minibatch step (sorted), shared by every model's trainer.
std::vector<std::size_t> minibatch_indices(std::size_t history_size, std::size_t batch_size,
                                           std::uint64_t seed, std::size_t step);

} // namespace cnnucb
