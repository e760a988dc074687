#include "cnnucb/datasets.hpp"

#include "cnnucb/errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace cnnucb {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;
constexpr int kCifarSide = 32;

// gzread passes uncompressed files through unchanged.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
    int err = 0;
    const char* msg = gzerror(f, &err);
    const std::string what = msg ? msg : "";
    gzclose(f);
    if (n < 0 || (err != Z_OK && err != Z_BUF_ERROR))
        throw LengthError("cannot read " + path.string() + ": " + what);
    return out;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    const bool gz = path.extension() == ".gz";
    gzFile f = gzopen(path.c_str(), gz ? "wb9" : "wbT");
    if (!f) throw FormatError("cannot write " + path.string());
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size())) throw FormatError("short write to " + path.string());
}

std::uint32_t big_endian(const std::vector<std::uint8_t>& b, std::size_t at) {
    return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
           (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

void put_big_endian(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) b.push_back(std::uint8_t(v >> shift));
}

std::string hex(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

struct Idx {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::size_t payload_offset = 0;
};

// Parses and length-checks an IDX header; ubyte payloads only.
Idx parse_idx(const std::vector<std::uint8_t>& b, const std::string& name) {
    if (b.size() < 4) throw LengthError(name + ": file too short for an IDX header");
    Idx idx;
    idx.magic = big_endian(b, 0);
    if (idx.magic != kImageMagic && idx.magic != kLabelMagic)
        throw FormatError(name + ": unexpected IDX magic " + hex(idx.magic));
    const std::size_t rank = idx.magic & 0xff;
    idx.payload_offset = 4 + 4 * rank;
    if (b.size() < idx.payload_offset) throw LengthError(name + ": truncated IDX header");
    std::size_t expect = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        idx.dims.push_back(big_endian(b, 4 + 4 * i));
        expect *= idx.dims.back();
    }
    const std::size_t have = b.size() - idx.payload_offset;
    if (have < expect)
        throw LengthError(name + ": truncated payload, header promises " + std::to_string(expect) +
                          " bytes, file has " + std::to_string(have));
    if (have > expect) throw FormatError(name + ": " + std::to_string(have - expect) + " trailing bytes");
    return idx;
}

void check_labels(const LabeledImageSet& set, const std::string& name) {
    for (std::size_t i = 0; i < set.labels.size(); ++i)
        if (set.labels[i] < 0 || set.labels[i] >= set.n_classes)
            throw LabelRangeError(name + ": label " + std::to_string(set.labels[i]) +
                                  " at record " + std::to_string(i) + " is outside [0, " +
                                  std::to_string(set.n_classes) + ")");
}

} // namespace

Matrix LabeledImageSet::image(std::size_t i) const {
    const int p = pixel_count();
    Matrix x(channels, p);
    const std::uint8_t* src = pixels.data() + i * std::size_t(channels) * std::size_t(p);
    for (int c = 0; c < channels; ++c)
        for (int j = 0; j < p; ++j) x(c, j) = src[std::size_t(c) * p + j] / 255.0;
    return x;
}

LabeledImageSet load_idx(const std::filesystem::path& image_path,
                         const std::filesystem::path& label_path, int n_classes) {
    const auto ib = read_file(image_path);
    const auto lb = read_file(label_path);
    const Idx ii = parse_idx(ib, image_path.string());
    const Idx li = parse_idx(lb, label_path.string());
    if (ii.magic != kImageMagic || ii.dims.size() != 3)
        throw FormatError(image_path.string() + ": expected an image file (magic " + hex(kImageMagic) +
                          "), found magic " + hex(ii.magic));
    if (li.magic != kLabelMagic || li.dims.size() != 1)
        throw FormatError(label_path.string() + ": expected a label file (magic " + hex(kLabelMagic) +
                          "), found magic " + hex(li.magic));
    if (ii.dims[0] != li.dims[0])
        throw FormatError("image count " + std::to_string(ii.dims[0]) + " differs from label count " +
                          std::to_string(li.dims[0]));
    LabeledImageSet set;
    set.channels = 1;
    set.height = static_cast<int>(ii.dims[1]);
    set.width = static_cast<int>(ii.dims[2]);
    set.n_classes = n_classes;
    set.pixels.assign(ib.begin() + std::ptrdiff_t(ii.payload_offset), ib.end());
    set.labels.assign(lb.begin() + std::ptrdiff_t(li.payload_offset), lb.end());
    check_labels(set, label_path.string());
    return set;
}

void write_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
               const LabeledImageSet& set) {
    if (set.channels != 1) throw ConfigError("IDX images hold a single channel");
    std::vector<std::uint8_t> ib, lb;
    put_big_endian(ib, kImageMagic);
    put_big_endian(ib, std::uint32_t(set.size()));
    put_big_endian(ib, std::uint32_t(set.height));
    put_big_endian(ib, std::uint32_t(set.width));
    ib.insert(ib.end(), set.pixels.begin(), set.pixels.end());
    put_big_endian(lb, kLabelMagic);
    put_big_endian(lb, std::uint32_t(set.size()));
    for (int l : set.labels) lb.push_back(std::uint8_t(l));
    write_file(image_path, ib);
    write_file(label_path, lb);
}

LabeledImageSet load_cifar10(const std::vector<std::filesystem::path>& batch_paths) {
    LabeledImageSet set;
    set.channels = 3;
    set.height = set.width = kCifarSide;
    set.n_classes = 10;
    for (const auto& path : batch_paths) {
        const auto b = read_file(path);
        if (b.empty() || b.size() % kCifarRecord != 0)
            throw FormatError(path.string() + ": length " + std::to_string(b.size()) +
                              " is not a positive multiple of " + std::to_string(kCifarRecord));
        for (std::size_t at = 0; at < b.size(); at += kCifarRecord) {
            set.labels.push_back(b[at]);
            set.pixels.insert(set.pixels.end(), b.begin() + std::ptrdiff_t(at + 1),
                              b.begin() + std::ptrdiff_t(at + kCifarRecord));
        }
        check_labels(set, path.string());
    }
    return set;
}

void write_cifar10(const std::filesystem::path& path, const LabeledImageSet& set) {
    if (set.channels != 3 || set.height != kCifarSide || set.width != kCifarSide)
        throw ConfigError("CIFAR-10 records are 3 x 32 x 32");
    std::vector<std::uint8_t> b;
    const std::size_t per = kCifarRecord - 1;
    for (std::size_t i = 0; i < set.size(); ++i) {
        b.push_back(std::uint8_t(set.labels[i]));
        b.insert(b.end(), set.pixels.begin() + std::ptrdiff_t(i * per),
                 set.pixels.begin() + std::ptrdiff_t((i + 1) * per));
    }
    write_file(path, b);
}

DatasetFileInfo inspect_dataset_file(const std::filesystem::path& path) {
    const auto b = read_file(path);
    DatasetFileInfo info;
    const std::uint32_t magic = b.size() >= 4 ? big_endian(b, 0) : 0;
    if (magic == kImageMagic || magic == kLabelMagic) {
        const Idx idx = parse_idx(b, path.string());
        info.kind = idx.magic == kImageMagic ? "idx-images" : "idx-labels";
        info.dims = idx.dims;
        info.records = idx.dims.empty() ? 0 : idx.dims[0];
        if (idx.magic == kLabelMagic)
            for (std::size_t i = idx.payload_offset; i < b.size(); ++i)
                if (b[i] > 9)
                    throw LabelRangeError(path.string() + ": label " + std::to_string(b[i]) +
                                          " outside [0, 10)");
        return info;
    }
    if (b.empty() || b.size() % kCifarRecord != 0)
        throw FormatError(path.string() + ": neither IDX (magic " + hex(magic) +
                          ") nor CIFAR-10 (length " + std::to_string(b.size()) + ")");
    const auto set = load_cifar10({path});
    info.kind = "cifar10";
    info.records = set.size();
    info.dims = {3, kCifarSide, kCifarSide};
    return info;
}

Matrix normalize_unit_frobenius(const Matrix& x) {
    const double n = x.norm();
    if (!(n > 0.0)) throw ZeroNormError("cannot normalize an all-zero context");
    if (!std::isfinite(n)) throw NumericError("non-finite context");
    return x / n;
}

Vector flatten(const Matrix& arm) { return Eigen::Map<const Vector>(arm.data(), arm.size()); }

BanditRound build_round(const Matrix& image, int label, int n_classes, std::size_t base_image_id) {
    if (label < 0 || label >= n_classes)
        throw LabelRangeError("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(n_classes) + ")");
    const Matrix x = normalize_unit_frobenius(image);
    const auto c = x.rows();
    BanditRound round;
    round.correct = static_cast<std::size_t>(label);
    round.base_image_id = base_image_id;
    round.arms.reserve(std::size_t(n_classes));
    for (int a = 0; a < n_classes; ++a) {
        Matrix arm = Matrix::Zero(c * n_classes, x.cols());
        arm.middleRows(a * c, c) = x;
        round.arms.push_back(std::move(arm));
    }
    return round;
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Fisher-Yates written out: std::shuffle's draw sequence is library-specific.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    return order;
}

ImageStream::ImageStream(const LabeledImageSet& set, std::uint64_t seed)
    : set_(&set), order_(shuffled_order(set.size(), seed)) {
    if (set.size() == 0) throw ConfigError("image stream over an empty dataset");
}

BanditRound ImageStream::next() {
    const std::size_t id = order_[cursor_];
    cursor_ = (cursor_ + 1) % order_.size();
    return build_round(set_->image(id), set_->labels[id], set_->n_classes, id);
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
    if (name == "linear") return SyntheticKind::linear;
    if (name == "quadratic") return SyntheticKind::quadratic;
    if (name == "cosine") return SyntheticKind::cosine;
    throw ConfigError("unknown synthetic kind '" + name + "'");
}

std::string to_string(SyntheticKind kind) {
    switch (kind) {
    case SyntheticKind::linear: return "linear";
    case SyntheticKind::quadratic: return "quadratic";
    case SyntheticKind::cosine: return "cosine";
    }
    return "linear";
}

double SyntheticTask::f_star(const Matrix& x) const {
    if (x.size() != a.size()) throw DimensionError("synthetic arm has the wrong size");
    const double s = flatten(x).dot(a);
    double f = 0.0;
    switch (kind) {
    case SyntheticKind::linear: f = (1.0 + s) / 2.0; break;
    case SyntheticKind::quadratic: f = s * s; break;
    case SyntheticKind::cosine: f = (1.0 + std::cos(3.0 * std::numbers::pi * s)) / 2.0; break;
    }
    return std::clamp(f, 0.0, 1.0);
}

SyntheticTask make_synthetic_task(SyntheticKind kind, int arm_dim, int n_arms, double noise_sigma,
                                  std::uint64_t seed) {
    if (arm_dim < 1 || n_arms < 1) throw ConfigError("synthetic task needs arm_dim, n_arms >= 1");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
    SyntheticTask task;
    task.kind = kind;
    task.arm_dim = arm_dim;
    task.n_arms = n_arms;
    task.noise_sigma = noise_sigma;
    task.seed = seed;
    std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    task.a.resize(arm_dim);
    for (int i = 0; i < arm_dim; ++i) task.a[i] = normal(rng);
    task.a.normalize();
    return task;
}

std::size_t SyntheticRound::best() const {
    return std::size_t(std::max_element(f_star.begin(), f_star.end()) - f_star.begin());
}

SyntheticStream::SyntheticStream(const SyntheticTask& task) : task_(task), rng_(task.seed) {
    if (task.a.size() != task.arm_dim) throw ConfigError("synthetic task direction has wrong length");
}

SyntheticRound SyntheticStream::next() {
    std::normal_distribution<double> normal(0.0, 1.0);
    SyntheticRound r;
    for (int i = 0; i < task_.n_arms; ++i) {
        Matrix x(1, task_.arm_dim);
        for (int j = 0; j < task_.arm_dim; ++j) x(0, j) = normal(rng_);
        x /= x.norm();
        const double f = task_.f_star(x);
        r.f_star.push_back(f);
        r.rewards.push_back(f + task_.noise_sigma * normal(rng_));
        r.arms.push_back(std::move(x));
    }
    return r;
}

} // namespace cnnucb
