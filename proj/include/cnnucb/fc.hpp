#pragma once

// Fully connected reward network used by the FC-UCB baseline:
//   h^1 = sigma(W^1 x) / sqrt(m), h^l = sigma(W^l h^{l-1}) / sqrt(m), f = <w_out, h^D> / sqrt(m)
// with D = depth - 1 hidden layers of width m and no biases. Parameters are one
// flat vector: W^1 (m x input_dim), W^2..W^D (m x m), w_out (m), each column-major.

#include "cnnucb/cnn.hpp"

#include <cstdint>
#include <span>

namespace cnnucb {

struct FcTopology {
    int depth = 4; // weight matrices, read-out included
    int width = 100;
    int input_dim = 1;
    Activation activation = Activation::sigmoid;

    int hidden_layers() const { return depth - 1; }
    std::size_t param_count() const;
    void validate() const;
};

struct FcOutput {
    double output = 0.0;
    GradientVec gradient;
};

// Hidden weights ~ N(0, 1), w_out ~ N(0, 1/m).
Vector fc_init_params(const FcTopology& topo, std::uint64_t seed);

double fc_predict(const Vector& x, const Vector& theta, const FcTopology& topo);

FcOutput fc_forward_gradient(const Vector& x, const Vector& theta, const FcTopology& topo);

// Output and gradient without the per-layer norms.
double fc_forward_gradient(const Vector& x, const Vector& theta, const FcTopology& topo,
                           Vector& gradient);

// (1/2) sum (f(x_i) - r_i)^2 and its gradient over the selected samples (all
// when empty). Zero input entries are skipped in the first layer.
double fc_loss_gradient(const Vector& theta, const FcTopology& topo,
                        std::span<const Vector> contexts, std::span<const double> rewards,
                        std::span<const std::size_t> indices, Vector& gradient);

// Same sums, one fc_forward_gradient call per sample.
double fc_loss_gradient_reference(const Vector& theta, const FcTopology& topo,
                                  std::span<const Vector> contexts,
                                  std::span<const double> rewards,
                                  std::span<const std::size_t> indices, Vector& gradient);

// k gradient steps from `start`; minibatching as in train_gd.
Vector fc_train_gd(const Vector& start, std::span<const Vector> contexts,
                   std::span<const double> rewards, double eta, std::size_t k,
                   const FcTopology& topo, const TrainOptions& options = {});

} // namespace cnnucb
