#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "tazza/errors.hpp"

namespace tazza {

using Vec = std::vector<double>;

// Dense row-major matrix of 64-bit reals; the universal carrier for weights,
// activations and similarity matrices.
struct Mat {
    std::size_t rows = 0, cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Mat(std::size_t r, std::size_t c, Vec d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != rows * cols) throw ShapeError("Mat: data length != rows*cols");
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && data == o.data; }
};

inline bool all_finite(const Mat& m) {
    return std::all_of(m.data.begin(), m.data.end(), [](double v) { return std::isfinite(v); });
}

// Product with deterministic summation order: each output entry accumulates
// over k ascending, so results are reproducible bit-for-bit.
inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
    Mat c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* ci = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

inline Mat transpose(const Mat& m) {
    Mat t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

inline Mat relu(Mat m) {
    for (double& v : m.data) v = v > 0.0 ? v : 0.0;
    return m;
}

inline Mat tanh_mat(Mat m) {
    for (double& v : m.data) v = std::tanh(v);
    return m;
}

// Row-wise softmax with per-row max subtraction. The denominator accumulates
// addends in value order so a permutation of the row cannot change the sum;
// softmax is therefore exactly equivariant under input permutations.
inline Mat softmax_rows(const Mat& m) {
    Mat out(m.rows, m.cols);
    Vec e(m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* x = m.row(i);
        double mx = x[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, x[j]);
        for (std::size_t j = 0; j < m.cols; ++j) e[j] = std::exp(x[j] - mx);
        Vec sorted = e;
        std::sort(sorted.begin(), sorted.end());
        double denom = 0.0;
        for (double v : sorted) denom += v;
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = e[j] / denom;
    }
    return out;
}

// X + b broadcast over rows.
inline Mat add_row_broadcast(Mat m, const Vec& bias) {
    if (bias.size() != m.cols) throw ShapeError("add_row_broadcast: bias length != cols");
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) r[j] += bias[j];
    }
    return m;
}

// First index of the max entry per row.
inline std::vector<std::size_t> argmax_rows(const Mat& m) {
    if (m.cols == 0) throw DegenerateInputError("argmax_rows: empty rows");
    std::vector<std::size_t> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < m.cols; ++j)
            if (r[j] > r[best]) best = j;
        out[i] = best;
    }
    return out;
}

inline double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

inline Mat add(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
    Mat c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

inline Mat sub(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw ShapeError("sub: shape mismatch");
    Mat c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

inline Mat scale(Mat m, double s) {
    for (double& v : m.data) v *= s;
    return m;
}

inline double dot(const Vec& u, const Vec& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

inline double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

// Cosine similarity, clamped to [-1, 1] against rounding.
inline double cosine_sim(const Vec& u, const Vec& v) {
    if (u.size() != v.size() || u.empty()) throw ShapeError("cosine_sim: length mismatch or empty");
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw DegenerateInputError("cosine_sim: zero-norm vector");
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

// PSNR sentinel for a zero-MSE pair. Kept out of Mat entries by convention;
// it only ever appears as a scalar metric value.
inline constexpr double kPsnrInf = std::numeric_limits<double>::infinity();

inline double psnr(const Mat& a, const Mat& b, double peak = 1.0) {
    if (!a.same_shape(b)) throw ShapeError("psnr: shape mismatch");
    if (peak <= 0.0) throw DegenerateInputError("psnr: peak must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return kPsnrInf;
    return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace tazza
