#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "tazza/errors.hpp"
#include "tazza/mat.hpp"
#include "tazza/rng.hpp"

namespace tazza {

// Feature matrix in [0,1] with integer labels. img_rows/img_cols are set for
// image-like data so patch and PSNR operations know the 2-D layout.
struct Dataset {
    Mat X;
    std::vector<int> y;
    int class_count = 0;
    std::size_t img_rows = 0, img_cols = 0;

    std::size_t size() const { return X.rows; }
    bool has_image_shape() const { return img_rows > 0 && img_cols > 0; }
};

// n sequences of length T with d features, stored step-major: steps[t] is the
// (n x d) slice of all sequences at time t.
struct SeqDataset {
    std::vector<Mat> steps;
    std::vector<int> y;
    int class_count = 0;

    std::size_t size() const { return steps.empty() ? 0 : steps.front().rows; }
    std::size_t t_steps() const { return steps.size(); }
    std::size_t dim() const { return steps.empty() ? 0 : steps.front().cols; }
};

// ---------------------------------------------------------------------------
// IDX format, bit-exact: big-endian 32-bit magic (0x00000803 images,
// 0x00000801 labels), big-endian dimension sizes, unsigned bytes.

namespace detail {

inline std::uint32_t read_be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

}  // namespace detail

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = detail::read_file(images_path);
    if (img.size() < 16) throw FormatError("idx images: truncated header");
    if (detail::read_be32(img.data()) != 0x00000803u)
        throw FormatError("idx images: bad magic");
    const std::size_t count = detail::read_be32(img.data() + 4);
    const std::size_t rows = detail::read_be32(img.data() + 8);
    const std::size_t cols = detail::read_be32(img.data() + 12);
    if (img.size() != 16 + count * rows * cols) throw FormatError("idx images: truncated data");

    const auto lab = detail::read_file(labels_path);
    if (lab.size() < 8) throw FormatError("idx labels: truncated header");
    if (detail::read_be32(lab.data()) != 0x00000801u)
        throw FormatError("idx labels: bad magic");
    if (detail::read_be32(lab.data() + 4) != count)
        throw FormatError("idx: image/label count mismatch");
    if (lab.size() != 8 + count) throw FormatError("idx labels: truncated data");

    Dataset ds;
    ds.img_rows = rows;
    ds.img_cols = cols;
    ds.X = Mat(count, rows * cols);
    for (std::size_t i = 0; i < count * rows * cols; ++i)
        ds.X.data[i] = static_cast<double>(img[16 + i]) / 255.0;
    ds.y.resize(count);
    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        ds.y[i] = static_cast<int>(lab[8 + i]);
        max_label = std::max(max_label, ds.y[i]);
    }
    ds.class_count = max_label + 1;
    return ds;
}

inline void save_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
    if (!ds.has_image_shape()) throw DegenerateInputError("save_idx: dataset has no image shape");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot write " + images_path);
    detail::write_be32(img, 0x00000803u);
    detail::write_be32(img, static_cast<std::uint32_t>(ds.size()));
    detail::write_be32(img, static_cast<std::uint32_t>(ds.img_rows));
    detail::write_be32(img, static_cast<std::uint32_t>(ds.img_cols));
    for (double v : ds.X.data) {
        const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        const unsigned char byte = static_cast<unsigned char>(q);
        img.write(reinterpret_cast<const char*>(&byte), 1);
    }
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("cannot write " + labels_path);
    detail::write_be32(lab, 0x00000801u);
    detail::write_be32(lab, static_cast<std::uint32_t>(ds.size()));
    for (int v : ds.y) {
        const unsigned char byte = static_cast<unsigned char>(v);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

// ---------------------------------------------------------------------------
// Synthetic generators.

// Gaussian class blobs clipped to [0,1]^d. Optional image shape lets the
// backdoor patch operate on blob features laid out as an image.
inline Dataset synth_blobs(int classes, std::size_t d, std::size_t n, double spread,
                           std::uint64_t seed, std::size_t img_rows = 0, std::size_t img_cols = 0) {
    if (classes < 2) throw DegenerateInputError("synth_blobs: need >= 2 classes");
    Rng rng(seed, stream_key({0xb10b5}));
    Mat centers(classes, d);
    for (double& v : centers.data) v = rng.uniform(0.2, 0.8);
    Dataset ds;
    ds.class_count = classes;
    ds.img_rows = img_rows;
    ds.img_cols = img_cols;
    ds.X = Mat(n, d);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
        ds.y[i] = c;
        for (std::size_t j = 0; j < d; ++j)
            ds.X(i, j) = std::clamp(centers(c, j) + spread * rng.gaussian(), 0.0, 1.0);
    }
    return ds;
}

namespace detail {

struct Pt {
    double x, y;
};

// Rough digit skeletons on the unit square (x right, y down), one or more
// polylines per class. Jittered and rasterized per sample.
inline const std::vector<std::vector<std::vector<Pt>>>& digit_strokes() {
    auto arc = [](double cx, double cy, double rx, double ry, double a0, double a1, int steps) {
        std::vector<Pt> pts;
        for (int i = 0; i <= steps; ++i) {
            const double a = a0 + (a1 - a0) * i / steps;
            pts.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
        }
        return pts;
    };
    static const std::vector<std::vector<std::vector<Pt>>> strokes = [&] {
        std::vector<std::vector<std::vector<Pt>>> s(10);
        s[0] = {arc(0.5, 0.5, 0.21, 0.31, 0.0, 6.2832, 24)};
        s[1] = {{{0.38, 0.28}, {0.52, 0.15}, {0.52, 0.85}}};
        s[2] = {arc(0.5, 0.3, 0.2, 0.15, 3.3416, 6.0, 10),
                {{0.67, 0.38}, {0.3, 0.85}, {0.72, 0.85}}};
        s[3] = {arc(0.45, 0.32, 0.2, 0.17, 3.6416, 7.8, 12),
                arc(0.45, 0.67, 0.22, 0.19, 4.9, 9.1, 12)};
        s[4] = {{{0.62, 0.15}, {0.26, 0.62}, {0.78, 0.62}}, {{0.62, 0.4}, {0.62, 0.85}}};
        s[5] = {{{0.7, 0.15}, {0.32, 0.15}, {0.3, 0.48}},
                arc(0.46, 0.65, 0.22, 0.2, -1.35, 2.6, 14)};
        s[6] = {{{0.62, 0.14}, {0.42, 0.34}, {0.32, 0.62}},
                arc(0.48, 0.67, 0.17, 0.17, 0.0, 6.2832, 18)};
        s[7] = {{{0.26, 0.17}, {0.74, 0.17}, {0.42, 0.85}}};
        s[8] = {arc(0.5, 0.32, 0.16, 0.16, 0.0, 6.2832, 18),
                arc(0.5, 0.68, 0.19, 0.18, 0.0, 6.2832, 18)};
        s[9] = {arc(0.53, 0.33, 0.17, 0.17, 0.0, 6.2832, 18), {{0.7, 0.36}, {0.62, 0.85}}};
        return s;
    }();
    return strokes;
}

}  // namespace detail

// Handwritten-digit-like grayscale images (28x28, 10 classes): per-sample
// jittered skeletons rasterized with a soft brush and quantized to 8 bits.
// A desk-scale stand-in with digit-image statistics (sparse bright ink on a
// dark background).
inline Dataset synth_digits(std::size_t n, std::uint64_t seed, std::size_t side = 28) {
    const auto& strokes = detail::digit_strokes();
    Rng rng(seed, stream_key({0xd161f5}));
    Dataset ds;
    ds.class_count = 10;
    ds.img_rows = side;
    ds.img_cols = side;
    ds.X = Mat(n, side * side);
    ds.y.resize(n);
    const double px = static_cast<double>(side);
    for (std::size_t s = 0; s < n; ++s) {
        const int digit = static_cast<int>(rng.uniform_index(10));
        ds.y[s] = digit;
        const double angle = rng.uniform(-0.16, 0.16);
        const double scl = rng.uniform(0.95, 1.2);
        const double tx = rng.uniform(-0.05, 0.05), ty = rng.uniform(-0.05, 0.05);
        const double ca = std::cos(angle) * scl, sa = std::sin(angle) * scl;
        const double sigma = rng.uniform(0.85, 1.15);  // brush radius in pixels
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        double* im = ds.X.row(s);
        for (const auto& stroke : strokes[digit]) {
            // jitter control points, then walk the polyline in ~half-pixel steps
            std::vector<detail::Pt> pts;
            pts.reserve(stroke.size());
            for (const detail::Pt& p : stroke) {
                const double jx = p.x + 0.018 * rng.gaussian();
                const double jy = p.y + 0.018 * rng.gaussian();
                pts.push_back({0.5 + ca * (jx - 0.5) - sa * (jy - 0.5) + tx,
                               0.5 + sa * (jx - 0.5) + ca * (jy - 0.5) + ty});
            }
            for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
                const double x0 = pts[i].x * px, y0 = pts[i].y * px;
                const double x1 = pts[i + 1].x * px, y1 = pts[i + 1].y * px;
                const double len = std::hypot(x1 - x0, y1 - y0);
                const int steps = std::max(1, static_cast<int>(len * 2.0));
                for (int k = 0; k <= steps; ++k) {
                    const double t = static_cast<double>(k) / steps;
                    const double cx = x0 + t * (x1 - x0), cy = y0 + t * (y1 - y0);
                    const int rlo = std::max(0, static_cast<int>(cy - 3));
                    const int rhi = std::min(static_cast<int>(side) - 1, static_cast<int>(cy + 3));
                    const int clo = std::max(0, static_cast<int>(cx - 3));
                    const int chi = std::min(static_cast<int>(side) - 1, static_cast<int>(cx + 3));
                    for (int r = rlo; r <= rhi; ++r)
                        for (int c = clo; c <= chi; ++c) {
                            const double dx = c + 0.5 - cx, dy = r + 0.5 - cy;
                            const double v = std::exp(-(dx * dx + dy * dy) * inv2s2);
                            double& cell = im[r * static_cast<int>(side) + c];
                            cell = std::max(cell, v);
                        }
                }
            }
        }
        // quantize to the 8-bit pixel grid
        for (std::size_t j = 0; j < side * side; ++j)
            im[j] = static_cast<double>(std::lround(im[j] * 255.0)) / 255.0;
    }
    return ds;
}

// Class-conditioned sinusoid patterns with noise; class c oscillates at c+1
// cycles per sequence.
inline SeqDataset synth_sequences(int classes, std::size_t t_steps, std::size_t d, std::size_t n,
                                  std::uint64_t seed) {
    if (classes < 2) throw DegenerateInputError("synth_sequences: need >= 2 classes");
    Rng rng(seed, stream_key({0x5e95}));
    SeqDataset ds;
    ds.class_count = classes;
    ds.steps.assign(t_steps, Mat(n, d));
    ds.y.resize(n);
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
        ds.y[i] = c;
        const double phase = rng.uniform(0.0, two_pi);
        const double freq = static_cast<double>(c + 1);
        for (std::size_t t = 0; t < t_steps; ++t)
            for (std::size_t j = 0; j < d; ++j) {
                const double arg = two_pi * freq * static_cast<double>(t) /
                                       static_cast<double>(t_steps) +
                                   phase + two_pi * static_cast<double>(j) / static_cast<double>(d);
                ds.steps[t](i, j) =
                    std::clamp(0.5 + 0.4 * std::sin(arg) + 0.04 * rng.gaussian(), 0.0, 1.0);
            }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Subsetting and partitioning.

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.class_count = ds.class_count;
    out.img_rows = ds.img_rows;
    out.img_cols = ds.img_cols;
    out.X = Mat(idx.size(), ds.X.cols);
    out.y.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < ds.X.cols; ++j) out.X(i, j) = ds.X(idx[i], j);
        out.y[i] = ds.y[idx[i]];
    }
    return out;
}

inline SeqDataset subset_seq(const SeqDataset& ds, const std::vector<std::size_t>& idx) {
    SeqDataset out;
    out.class_count = ds.class_count;
    out.steps.assign(ds.t_steps(), Mat(idx.size(), ds.dim()));
    out.y.resize(idx.size());
    for (std::size_t t = 0; t < ds.t_steps(); ++t)
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < ds.dim(); ++j) out.steps[t](i, j) = ds.steps[t](idx[i], j);
    for (std::size_t i = 0; i < idx.size(); ++i) out.y[i] = ds.y[idx[i]];
    return out;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> dirichlet_draw(
    const std::vector<std::vector<std::size_t>>& by_class, std::size_t n_clients, double alpha,
    Rng& rng) {
    std::vector<std::vector<std::size_t>> shards(n_clients);
    for (const auto& members : by_class) {
        // Dir(alpha) proportions via normalized Gamma draws
        Vec cumulative(n_clients);
        double total = 0.0;
        for (double& p : cumulative) {
            p = rng.gamma(alpha);
            total += p;
        }
        double run = 0.0;
        for (double& p : cumulative) {
            run += p / total;
            p = run;
        }
        // each sample of the class lands i.i.d. per the drawn proportions
        for (std::size_t member : members) {
            const double u = rng.next_double();
            const std::size_t k = static_cast<std::size_t>(
                std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
            shards[std::min(k, n_clients - 1)].push_back(member);
        }
    }
    for (auto& shard : shards) std::sort(shard.begin(), shard.end());
    return shards;
}

}  // namespace detail

// Non-i.i.d. split: per class, client shares drawn from Dir(alpha). Every
// client is guaranteed at least one sample: bounded re-draws, then a
// round-robin top-up from the largest shards.
inline std::vector<std::vector<std::size_t>> dirichlet_partition(const std::vector<int>& labels,
                                                                 int class_count,
                                                                 std::size_t n_clients, double alpha,
                                                                 std::uint64_t seed) {
    if (n_clients == 0 || alpha <= 0.0)
        throw DegenerateInputError("dirichlet_partition: bad client count or alpha");
    if (labels.size() < n_clients)
        throw DegenerateInputError("dirichlet_partition: dataset smaller than client count");
    std::vector<std::vector<std::size_t>> by_class(class_count);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    Rng rng(seed, stream_key({0xd112c}));
    std::vector<std::vector<std::size_t>> shards;
    for (int attempt = 0; attempt < 20; ++attempt) {
        shards = detail::dirichlet_draw(by_class, n_clients, alpha, rng);
        const bool ok = std::none_of(shards.begin(), shards.end(),
                                     [](const auto& s) { return s.empty(); });
        if (ok) return shards;
    }
    for (auto& shard : shards) {
        if (!shard.empty()) continue;
        auto largest = std::max_element(shards.begin(), shards.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        shard.push_back(largest->back());
        largest->pop_back();
    }
    return shards;
}

inline std::vector<std::vector<std::size_t>> dirichlet_partition(const Dataset& ds,
                                                                 std::size_t n_clients, double alpha,
                                                                 std::uint64_t seed) {
    return dirichlet_partition(ds.y, ds.class_count, n_clients, alpha, seed);
}

}  // namespace tazza
