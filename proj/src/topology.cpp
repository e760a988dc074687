#include "cnnucb/topology.hpp"

#include "cnnucb/errors.hpp"

#include <cmath>

namespace cnnucb {

Activation parse_activation(const std::string& name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "softplus") return Activation::softplus;
    throw ConfigError("unknown activation '" + name + "' (expected sigmoid or softplus)");
}

std::string to_string(Activation a) {
    return a == Activation::sigmoid ? "sigmoid" : "softplus";
}

namespace {
double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}
} // namespace

double activate(Activation a, double z) {
    if (a == Activation::sigmoid) return sigmoid(z);
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double activate_derivative(Activation a, double z) {
    const double s = sigmoid(z);
    if (a == Activation::sigmoid) return s * (1.0 - s);
    return s;
}

NetTopology NetTopology::line(int layers, int channels, int patch, int in_channels, int pixels,
                              Activation act) {
    NetTopology t;
    t.layers = layers;
    t.channels = channels;
    t.patch = patch;
    t.in_channels = in_channels;
    t.spatial = Spatial::line(pixels);
    t.activation = act;
    t.validate();
    return t;
}

NetTopology NetTopology::grid(int layers, int channels, int kernel, int in_channels, int height,
                              int width, Activation act) {
    NetTopology t;
    t.layers = layers;
    t.channels = channels;
    t.patch = kernel * kernel;
    t.in_channels = in_channels;
    t.spatial = Spatial::grid(height, width);
    t.activation = act;
    t.validate();
    return t;
}

double NetTopology::mu() const {
    // sup sigmoid' = 1/4 and sup |sigmoid''| = 1/(6 sqrt 3) < 1/4; softplus' is
    // the sigmoid, so softplus is 1-Lipschitz and 1/4-smooth.
    return activation == Activation::sigmoid ? 0.25 : 1.0;
}

std::size_t NetTopology::param_count() const {
    const auto m = static_cast<std::size_t>(channels);
    const auto q = static_cast<std::size_t>(patch);
    const auto c = static_cast<std::size_t>(in_channels);
    const auto p = static_cast<std::size_t>(pixels());
    const auto l = static_cast<std::size_t>(layers);
    return m * q * c + (l - 1) * m * q * m + m * p;
}

void NetTopology::validate() const {
    if (layers < 1 || channels < 1 || patch < 1 || in_channels < 1)
        throw ConfigError("topology: layers, channels, patch and in_channels must all be >= 1");
    if (spatial.height < 1 || spatial.width < 1)
        throw ConfigError("topology: spatial extent must be >= 1");
    if (spatial.kind == Spatial::Kind::line && spatial.height != 1)
        throw ConfigError("topology: line topology must have height 1");
    if (spatial.kind == Spatial::Kind::grid) {
        const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(patch))));
        if (k * k != patch)
            throw ConfigError("topology: grid patch size " + std::to_string(patch) +
                              " is not a perfect square");
        if (k > std::min(spatial.height, spatial.width))
            throw ConfigError("topology: kernel larger than the image");
    }
}

NetTopology NetTopology::with_channels(int m) const {
    NetTopology t = *this;
    t.channels = m;
    t.validate();
    return t;
}

bool operator==(const NetTopology& a, const NetTopology& b) {
    return a.layers == b.layers && a.channels == b.channels && a.patch == b.patch &&
           a.in_channels == b.in_channels && a.spatial.kind == b.spatial.kind &&
           a.spatial.height == b.spatial.height && a.spatial.width == b.spatial.width &&
           a.activation == b.activation;
}

std::vector<int> patch_table(const NetTopology& topo) {
    const int q = topo.patch;
    const int p = topo.pixels();
    std::vector<int> table(static_cast<std::size_t>(q) * p, -1);
    if (topo.spatial.kind == Spatial::Kind::line) {
        const int before = (q - 1) / 2;
        for (int j = 0; j < p; ++j)
            for (int s = 0; s < q; ++s) {
                const int src = j - before + s;
                if (src >= 0 && src < p) table[static_cast<std::size_t>(j) * q + s] = src;
            }
        return table;
    }
    const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(q))));
    const int before = (k - 1) / 2; // remaining k - 1 - before pad after
    const int h = topo.spatial.height;
    const int w = topo.spatial.width;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const int j = r * w + c;
            for (int dr = 0; dr < k; ++dr)
                for (int dc = 0; dc < k; ++dc) {
                    const int sr = r - before + dr;
                    const int sc = c - before + dc;
                    if (sr >= 0 && sr < h && sc >= 0 && sc < w)
                        table[static_cast<std::size_t>(j) * q + dr * k + dc] = sr * w + sc;
                }
        }
    return table;
}

} // namespace cnnucb
