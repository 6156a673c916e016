#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <zlib.h>

#include "feel/config.hpp"
#include "feel/rng.hpp"

namespace feel {

struct IdxFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Feature matrix (row-major, values in [0,1]) plus integer class labels.
// Immutable after construction; partitions reference it by index.
struct Dataset {
    std::size_t dim = 0;
    int num_classes = 0;
    std::vector<double> features; // size() * dim
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }

    std::span<const double> sample(std::size_t i) const {
        return {features.data() + i * dim, dim};
    }
};

namespace idx {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

// gzopen reads both plain and gzip-compressed files transparently.
inline std::vector<unsigned char> read_file(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open IDX file: " + path);
    std::vector<unsigned char> out;
    unsigned char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw IdxFormatError("corrupt gzip stream in " + path);
    return out;
}

inline std::uint32_t read_u32_be(const std::vector<unsigned char>& b, std::size_t off) {
    if (off + 4 > b.size()) throw IdxFormatError("truncated IDX header");
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

inline void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace idx

// Load an MNIST-style IDX image/label pair. Pixels are scaled to [0,1].
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = idx::read_file(images_path);
    const auto lbl = idx::read_file(labels_path);

    if (idx::read_u32_be(img, 0) != idx::kImagesMagic)
        throw IdxFormatError("bad magic number in " + images_path);
    if (idx::read_u32_be(lbl, 0) != idx::kLabelsMagic)
        throw IdxFormatError("bad magic number in " + labels_path);

    const std::size_t n_img = idx::read_u32_be(img, 4);
    const std::size_t rows = idx::read_u32_be(img, 8);
    const std::size_t cols = idx::read_u32_be(img, 12);
    const std::size_t n_lbl = idx::read_u32_be(lbl, 4);
    if (n_img != n_lbl)
        throw IdxFormatError("image/label count mismatch: " + std::to_string(n_img) + " vs " +
                             std::to_string(n_lbl));
    const std::size_t dim = rows * cols;
    if (img.size() != 16 + n_img * dim) throw IdxFormatError("truncated image data in " + images_path);
    if (lbl.size() != 8 + n_lbl) throw IdxFormatError("truncated label data in " + labels_path);

    Dataset d;
    d.dim = dim;
    d.features.resize(n_img * dim);
    d.labels.resize(n_img);
    for (std::size_t i = 0; i < n_img * dim; ++i)
        d.features[i] = static_cast<double>(img[16 + i]) / 255.0;
    int max_label = 0;
    for (std::size_t i = 0; i < n_lbl; ++i) {
        d.labels[i] = static_cast<int>(lbl[8 + i]);
        max_label = std::max(max_label, d.labels[i]);
    }
    d.num_classes = max_label + 1;
    return d;
}

// Write a dataset out as an IDX image/label pair (features quantized back to
// bytes). rows*cols must equal the feature dimension.
inline void write_idx(const Dataset& d, std::size_t rows, std::size_t cols,
                      const std::string& images_path, const std::string& labels_path) {
    if (rows * cols != d.dim) throw std::invalid_argument("write_idx: rows*cols != dim");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot write " + images_path);
    idx::write_u32_be(img, idx::kImagesMagic);
    idx::write_u32_be(img, static_cast<std::uint32_t>(d.size()));
    idx::write_u32_be(img, static_cast<std::uint32_t>(rows));
    idx::write_u32_be(img, static_cast<std::uint32_t>(cols));
    std::vector<unsigned char> bytes(d.features.size());
    for (std::size_t i = 0; i < d.features.size(); ++i) {
        double v = std::clamp(d.features[i], 0.0, 1.0) * 255.0;
        bytes[i] = static_cast<unsigned char>(v + 0.5);
    }
    img.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));

    std::ofstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw IoError("cannot write " + labels_path);
    idx::write_u32_be(lbl, idx::kLabelsMagic);
    idx::write_u32_be(lbl, static_cast<std::uint32_t>(d.size()));
    for (int l : d.labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        lbl.write(reinterpret_cast<const char*>(&b), 1);
    }
}

// Gaussian class clusters with separated binary-pattern means, clamped to
// [0,1] so the data survives byte quantization. Deterministic given stream.
inline Dataset generate_synthetic(int num_classes, int per_class, int dim, RngStream& rng) {
    Dataset d;
    d.dim = static_cast<std::size_t>(dim);
    d.num_classes = num_classes;
    d.features.reserve(static_cast<std::size_t>(num_classes) * per_class * dim);
    d.labels.reserve(static_cast<std::size_t>(num_classes) * per_class);

    std::vector<double> centers(static_cast<std::size_t>(num_classes) * dim);
    for (auto& c : centers) c = rng.uniform() < 0.5 ? 0.2 : 0.8;

    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            for (int j = 0; j < dim; ++j) {
                const double v = centers[static_cast<std::size_t>(c) * dim + j] +
                                 0.15 * rng.normal();
                d.features.push_back(std::clamp(v, 0.0, 1.0));
            }
            d.labels.push_back(c);
        }
    }
    return d;
}

namespace detail {

inline Dataset take(const Dataset& d, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.dim = d.dim;
    out.num_classes = d.num_classes;
    out.features.reserve(indices.size() * d.dim);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto s = d.sample(i);
        out.features.insert(out.features.end(), s.begin(), s.end());
        out.labels.push_back(d.labels[i]);
    }
    return out;
}

} // namespace detail

// Uniform subsample of n samples without replacement (paper-style train pool).
inline Dataset subsample(const Dataset& d, std::size_t n, RngStream& rng) {
    if (n == 0 || n >= d.size()) return d;
    auto picks = rng.sample_without_replacement(d.size(), n);
    std::sort(picks.begin(), picks.end());
    return detail::take(d, picks);
}

// Stratified train/test split: per class, round(fraction * count) samples are
// held out for the server-side test set.
inline std::pair<Dataset, Dataset> split_test(const Dataset& d, double fraction, RngStream& rng) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split_test: fraction must lie in (0,1)");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.num_classes));
    for (std::size_t i = 0; i < d.size(); ++i)
        by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);

    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (auto& members : by_class) {
        const std::size_t k =
            static_cast<std::size_t>(fraction * static_cast<double>(members.size()) + 0.5);
        auto picks = rng.sample_without_replacement(members.size(), k);
        std::vector<char> is_test(members.size(), 0);
        for (std::size_t p : picks) is_test[p] = 1;
        for (std::size_t m = 0; m < members.size(); ++m)
            (is_test[m] ? test_idx : train_idx).push_back(members[m]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {detail::take(d, train_idx), detail::take(d, test_idx)};
}

inline std::vector<std::size_t> label_counts(const Dataset& d) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(d.num_classes), 0);
    for (int l : d.labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

} // namespace feel
