#pragma once

// Hot loops of the CNN reward model.
//
// Two implementations of the same quantities live here:
//   *_reference  one sample at a time through forward()/network_gradient();
//                kept as the oracle for tests and as the benchmark baseline.
//   the others   direct convolution loops over m-wide channel vectors that skip
//                inactive input channels, OpenMP over a fixed number of work lanes.
//
// Lane count and chunking depend only on the inputs, never on the thread count,
// so results are bit-identical for any OMP_NUM_THREADS.

#include "cnnucb/cnn.hpp"

#include <span>

namespace cnnucb::kernels {

struct LossGradient {
    double loss = 0.0;
    Vector gradient;
};

// Upper bound on independent accumulators in loss_gradient.
inline constexpr int kWorkLanes = 8;
// Target number of pixels (samples * p) per chunk.
inline constexpr int kChunkColumns = 4096;

// (1/2) sum_i (f(x_i) - r_i)^2 and its gradient over the selected samples
// (all samples when `indices` is empty).
LossGradient loss_gradient(const CnnParams& params, const NetTopology& topo,
                           const TrainingHistory& history,
                           std::span<const std::size_t> indices = {});

LossGradient loss_gradient_reference(const CnnParams& params, const NetTopology& topo,
                                     const TrainingHistory& history,
                                     std::span<const std::size_t> indices = {});

// Outputs and gradients for a set of arms: outputs[i] = f(arms[i]),
// gradients.col(i) = g(arms[i]). Parallel over arms.
void outputs_and_gradients(const CnnParams& params, const NetTopology& topo,
                           std::span<const ArmContext> arms, Vector& outputs, Matrix& gradients);

void outputs_and_gradients_reference(const CnnParams& params, const NetTopology& topo,
                                     std::span<const ArmContext> arms, Vector& outputs,
                                     Matrix& gradients);

// Input channels with any nonzero entry.
std::vector<int> active_channels(const ArmContext& x);

} // namespace cnnucb::kernels
