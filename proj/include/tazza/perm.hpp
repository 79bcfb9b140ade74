#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tazza/errors.hpp"
#include "tazza/mat.hpp"
#include "tazza/rng.hpp"

namespace tazza {

// A bijection on {0..n-1}. By convention all applications are gathers:
// out[i] = in[idx[i]].
struct IndexPerm {
    std::vector<std::size_t> idx;

    std::size_t size() const { return idx.size(); }
    std::size_t operator[](std::size_t i) const { return idx[i]; }
    bool operator==(const IndexPerm& o) const { return idx == o.idx; }

    static IndexPerm identity(std::size_t n) {
        IndexPerm p;
        p.idx.resize(n);
        std::iota(p.idx.begin(), p.idx.end(), 0);
        return p;
    }

    bool is_identity() const {
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx[i] != i) return false;
        return true;
    }
};

inline bool is_valid_perm(const IndexPerm& p) {
    std::vector<std::size_t> s = p.idx;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] != i) return false;
    return true;
}

// Deterministic bijection on {0..n-1}: Fisher-Yates over a counter-based
// generator keyed by (seed, stream_id). Same inputs, same permutation, on
// every client.
inline IndexPerm gen_perm(std::uint64_t seed, std::uint64_t stream_id, std::size_t n) {
    if (n == 0) throw DegenerateInputError("gen_perm: n must be >= 1");
    IndexPerm p = IndexPerm::identity(n);
    Rng rng(seed, stream_id);
    rng.shuffle(p.idx);
    return p;
}

// Argsort of the index vector: p composed with invert(p) is the identity.
inline IndexPerm invert_perm(const IndexPerm& p) {
    if (!is_valid_perm(p)) throw InvariantError("invert_perm: not a bijection");
    IndexPerm inv;
    inv.idx.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv.idx[p[i]] = i;
    return inv;
}

template <class T>
std::vector<T> apply_perm(const std::vector<T>& v, const IndexPerm& p) {
    if (v.size() != p.size()) throw ShapeError("apply_perm: length mismatch");
    std::vector<T> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[p[i]];
    return out;
}

inline Mat gather_cols(const Mat& m, const IndexPerm& p) {
    if (m.cols != p.size()) throw ShapeError("gather_cols: perm length != cols");
    Mat out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(i, p[j]);
    return out;
}

inline Mat gather_rows(const Mat& m, const IndexPerm& p) {
    if (m.rows != p.size()) throw ShapeError("gather_rows: perm length != rows");
    Mat out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(p[i], j);
    return out;
}

}  // namespace tazza
