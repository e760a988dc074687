#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace cnnucb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// An arm: c x p matrix, one row per input channel, one column per pixel.
// Pixels of a Grid topology are stored row-major (pixel = row * width + col).
using ArmContext = Matrix;

enum class Activation { sigmoid, softplus };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

// Elementwise activation and its derivative.
double activate(Activation a, double z);
double activate_derivative(Activation a, double z);

struct Spatial {
    enum class Kind { line, grid };
    Kind kind = Kind::line;
    int height = 1;
    int width = 1;

    static Spatial line(int pixels) { return {Kind::line, 1, pixels}; }
    static Spatial grid(int h, int w) { return {Kind::grid, h, w}; }
    int pixels() const { return height * width; }
};

// Shape of the convolutional reward network: `layers` conv layers of
// `channels` channels each, patches of `patch` pixels, then one linear read-out.
struct NetTopology {
    int layers = 1;
    int channels = 1;
    int patch = 1;
    int in_channels = 1;
    Spatial spatial;
    Activation activation = Activation::sigmoid;

    // Line topology; `patch` is the window length.
    static NetTopology line(int layers, int channels, int patch, int in_channels, int pixels,
                            Activation act = Activation::sigmoid);
    // Grid topology with a kernel x kernel window, so patch = kernel^2.
    static NetTopology grid(int layers, int channels, int kernel, int in_channels, int height,
                            int width, Activation act = Activation::sigmoid);

    int pixels() const { return spatial.pixels(); }

    // Joint Lipschitz constant of sigma and sigma'.
    double mu() const;

    std::size_t param_count() const;

    // Throws ConfigError when any invariant is violated.
    void validate() const;

    NetTopology with_channels(int m) const;
};

bool operator==(const NetTopology& a, const NetTopology& b);

// For every (offset s, pixel j) the source pixel feeding slot s of patch j,
// or -1 when the slot falls in the zero padding. Stored as table[j * patch + s].
std::vector<int> patch_table(const NetTopology& topo);

} // namespace cnnucb
