#pragma once

#include "cnnucb/topology.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace cnnucb {

// Raw pixel bytes, image-major then channel-major then row-major; image(i)
// returns them scaled by 1/255 as a c x p matrix.
struct LabeledImageSet {
    std::vector<std::uint8_t> pixels;
    std::vector<int> labels;
    int channels = 1;
    int height = 0;
    int width = 0;
    int n_classes = 10;

    std::size_t size() const { return labels.size(); }
    int pixel_count() const { return height * width; }
    Matrix image(std::size_t i) const;
};

// IDX pair (images magic 0x00000803, labels magic 0x00000801). Files may be
// gzip-compressed. Throws FormatError on a wrong magic or mismatched counts,
// LengthError on a truncated payload, LabelRangeError on labels >= n_classes.
LabeledImageSet load_idx(const std::filesystem::path& image_path,
                         const std::filesystem::path& label_path, int n_classes = 10);

// Writes the pair; gzip-compressed when a path ends in ".gz".
void write_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
               const LabeledImageSet& set);

// CIFAR-10 binary batches: 3073-byte records, label byte then 3 x 32 x 32 pixels.
LabeledImageSet load_cifar10(const std::vector<std::filesystem::path>& batch_paths);
void write_cifar10(const std::filesystem::path& path, const LabeledImageSet& set);

// Header facts of one dataset file, after validating its length.
struct DatasetFileInfo {
    std::string kind; // "idx-images", "idx-labels" or "cifar10"
    std::size_t records = 0;
    std::vector<std::uint32_t> dims;
};
DatasetFileInfo inspect_dataset_file(const std::filesystem::path& path);

// x / ||x||_F; throws ZeroNormError for an all-zero input.
Matrix normalize_unit_frobenius(const Matrix& x);

// Column-major flattening of an arm, used by the vector-input baselines.
Vector flatten(const Matrix& arm);

struct BanditRound {
    std::vector<Matrix> arms;
    std::size_t correct = 0;
    std::size_t base_image_id = 0;

    double reward(std::size_t chosen) const { return chosen == correct ? 1.0 : 0.0; }
};

// n_classes arms of shape (n_classes * c) x p; arm a carries the image in rows
// [a*c, (a+1)*c) and zeros elsewhere. The image is normalized here.
BanditRound build_round(const Matrix& image, int label, int n_classes,
                        std::size_t base_image_id = 0);

// Seeded uniform permutation of 0..n-1.
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed);

// Rounds over a dataset in a seeded shuffled order; wraps around after N rounds.
class ImageStream {
public:
    ImageStream(const LabeledImageSet& set, std::uint64_t seed);
    BanditRound next();

private:
    const LabeledImageSet* set_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

enum class SyntheticKind { linear, quadratic, cosine };
SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

struct SyntheticTask {
    SyntheticKind kind = SyntheticKind::linear;
    Vector a; // unit norm, length arm_dim
    double noise_sigma = 0.0;
    int arm_dim = 1;
    int n_arms = 2;
    std::uint64_t seed = 0;

    // f*(x) clipped to [0, 1]
    double f_star(const Matrix& x) const;
};

// Draws the hidden direction a from the seed.
SyntheticTask make_synthetic_task(SyntheticKind kind, int arm_dim, int n_arms,
                                  double noise_sigma, std::uint64_t seed);

struct SyntheticRound {
    std::vector<Matrix> arms; // 1 x arm_dim, unit norm
    std::vector<double> f_star;
    std::vector<double> rewards;

    std::size_t best() const;
};

class SyntheticStream {
public:
    explicit SyntheticStream(const SyntheticTask& task);
    SyntheticRound next();

private:
    SyntheticTask task_;
    std::mt19937_64 rng_;
};

} // namespace cnnucb
