#pragma once

#include <cstdint>
#include <vector>

#include "tazza/errors.hpp"
#include "tazza/nn.hpp"
#include "tazza/perm.hpp"

namespace tazza {

// Shape descriptor a rule is derived against. The derived permutations are a
// pure function of (seed, shape), so every client that knows the seed and the
// architecture reconstructs the same rule independently.
struct ModelShape {
    Arch arch = Arch::mlp;
    std::vector<std::size_t> dims;  // mlp: {in, hidden..., classes}
    std::size_t input_dim = 0, hidden_dim = 0, classes = 0;  // rnn
    std::size_t n_tokens = 0, patch_dim = 0;                 // transformer (+hidden_dim/classes)

    static ModelShape mlp(std::vector<std::size_t> dims) {
        ModelShape s;
        s.arch = Arch::mlp;
        s.dims = std::move(dims);
        return s;
    }
    static ModelShape rnn(std::size_t input_dim, std::size_t hidden, std::size_t classes) {
        ModelShape s;
        s.arch = Arch::rnn;
        s.input_dim = input_dim;
        s.hidden_dim = hidden;
        s.classes = classes;
        return s;
    }
    static ModelShape transformer(std::size_t n_tokens, std::size_t patch_dim,
                                  std::size_t hidden, std::size_t classes) {
        ModelShape s;
        s.arch = Arch::transformer;
        s.n_tokens = n_tokens;
        s.patch_dim = patch_dim;
        s.hidden_dim = hidden;
        s.classes = classes;
        return s;
    }
};

inline ModelShape shape_of(const MlpModel& m) {
    std::vector<std::size_t> dims{m.in_dim()};
    for (const LinearLayer& l : m.layers) dims.push_back(l.out_dim());
    return ModelShape::mlp(std::move(dims));
}

inline ModelShape shape_of(const RnnModel& m) {
    return ModelShape::rnn(m.input_dim(), m.hidden_dim(), m.classes());
}

inline ModelShape shape_of(const TinyTransformer& m) {
    return ModelShape::transformer(m.n_tokens(), m.patch_dim(), m.hidden_dim(), m.classes());
}

// The shared secret: a seed plus the index bijections derived from it.
struct ShuffleRule {
    std::uint64_t seed = 0;
    IndexPerm input_perm;                  // flat feature order (mlp/rnn)
    std::vector<IndexPerm> hidden_perms;   // one per hidden layer / hidden state
    IndexPerm output_perm;                 // class order
    IndexPerm token_perm;                  // transformer: token order
    IndexPerm intra_perm;                  // transformer: order within a token

    bool operator==(const ShuffleRule& o) const {
        return input_perm == o.input_perm && hidden_perms == o.hidden_perms &&
               output_perm == o.output_perm && token_perm == o.token_perm &&
               intra_perm == o.intra_perm;
    }
};

namespace detail {
// One stream per (role, layer) so adding layers never shifts other perms.
enum RuleStream : std::uint64_t { kInput = 1, kHidden = 2, kOutput = 3, kToken = 4, kIntra = 5 };

inline std::uint64_t rule_stream(std::uint64_t role, std::uint64_t layer = 0) {
    return (role << 32) | layer;
}
}  // namespace detail

inline ShuffleRule derive_rule(std::uint64_t seed, const ModelShape& shape) {
    ShuffleRule r;
    r.seed = seed;
    switch (shape.arch) {
        case Arch::mlp: {
            if (shape.dims.size() < 2) throw ShapeError("derive_rule: bad MLP shape");
            r.input_perm = gen_perm(seed, detail::rule_stream(detail::kInput), shape.dims.front());
            for (std::size_t l = 1; l + 1 < shape.dims.size(); ++l)
                r.hidden_perms.push_back(
                    gen_perm(seed, detail::rule_stream(detail::kHidden, l - 1), shape.dims[l]));
            r.output_perm = gen_perm(seed, detail::rule_stream(detail::kOutput), shape.dims.back());
            break;
        }
        case Arch::rnn: {
            r.input_perm = gen_perm(seed, detail::rule_stream(detail::kInput), shape.input_dim);
            r.hidden_perms.push_back(
                gen_perm(seed, detail::rule_stream(detail::kHidden, 0), shape.hidden_dim));
            r.output_perm = gen_perm(seed, detail::rule_stream(detail::kOutput), shape.classes);
            break;
        }
        case Arch::transformer: {
            r.intra_perm = gen_perm(seed, detail::rule_stream(detail::kIntra), shape.patch_dim);
            r.token_perm = gen_perm(seed, detail::rule_stream(detail::kToken), shape.n_tokens);
            r.output_perm = gen_perm(seed, detail::rule_stream(detail::kOutput), shape.classes);
            break;
        }
    }
    return r;
}

inline ShuffleRule identity_rule(const ModelShape& shape) {
    ShuffleRule r;
    switch (shape.arch) {
        case Arch::mlp:
            r.input_perm = IndexPerm::identity(shape.dims.front());
            for (std::size_t l = 1; l + 1 < shape.dims.size(); ++l)
                r.hidden_perms.push_back(IndexPerm::identity(shape.dims[l]));
            r.output_perm = IndexPerm::identity(shape.dims.back());
            break;
        case Arch::rnn:
            r.input_perm = IndexPerm::identity(shape.input_dim);
            r.hidden_perms.push_back(IndexPerm::identity(shape.hidden_dim));
            r.output_perm = IndexPerm::identity(shape.classes);
            break;
        case Arch::transformer:
            r.intra_perm = IndexPerm::identity(shape.patch_dim);
            r.token_perm = IndexPerm::identity(shape.n_tokens);
            r.output_perm = IndexPerm::identity(shape.classes);
            break;
    }
    return r;
}

inline ShuffleRule invert_rule(const ShuffleRule& r) {
    ShuffleRule inv;
    inv.seed = r.seed;
    if (r.input_perm.size()) inv.input_perm = invert_perm(r.input_perm);
    for (const IndexPerm& p : r.hidden_perms) inv.hidden_perms.push_back(invert_perm(p));
    if (r.output_perm.size()) inv.output_perm = invert_perm(r.output_perm);
    if (r.token_perm.size()) inv.token_perm = invert_perm(r.token_perm);
    if (r.intra_perm.size()) inv.intra_perm = invert_perm(r.intra_perm);
    return inv;
}

// ---------------------------------------------------------------------------
// Input shuffling. Flat inputs: column j of the output holds column
// input_perm[j] of the input. Token inputs: intra_perm within each token,
// then token_perm across tokens. Values survive, semantics do not.

inline Mat shuffle_input(const Mat& x, const ShuffleRule& rule) {
    if (rule.token_perm.size()) {
        if (x.rows != rule.token_perm.size() || x.cols != rule.intra_perm.size())
            throw ShapeError("shuffle_input: token shape mismatch");
        return gather_rows(gather_cols(x, rule.intra_perm), rule.token_perm);
    }
    return gather_cols(x, rule.input_perm);
}

inline Mat unshuffle_input(const Mat& x, const ShuffleRule& rule) {
    if (rule.token_perm.size())
        return gather_cols(gather_rows(x, invert_perm(rule.token_perm)), invert_perm(rule.intra_perm));
    return gather_cols(x, invert_perm(rule.input_perm));
}

inline std::vector<Mat> shuffle_seq_input(const std::vector<Mat>& steps, const ShuffleRule& rule) {
    std::vector<Mat> out;
    out.reserve(steps.size());
    for (const Mat& x : steps) out.push_back(gather_cols(x, rule.input_perm));
    return out;
}

// ---------------------------------------------------------------------------
// Layer and model shuffling. Pure index gathers, no arithmetic, so round
// trips are bit-exact.

// W'[i][j] = W[row_perm[i]][col_perm[j]], b'[i] = b[row_perm[i]].
inline LinearLayer shuffle_linear(const LinearLayer& l, const IndexPerm& row_perm,
                                  const IndexPerm& col_perm) {
    if (row_perm.size() != l.out_dim() || col_perm.size() != l.in_dim())
        throw ShapeError("shuffle_linear: perm size mismatch");
    LinearLayer out;
    out.W = gather_rows(gather_cols(l.W, col_perm), row_perm);
    out.b = apply_perm(l.b, row_perm);
    return out;
}

// Layer l consumes the previous layer's output order, so its column perm is
// the previous row perm; the final row perm is the output perm.
inline MlpModel shuffle_mlp(const MlpModel& m, const ShuffleRule& rule) {
    if (rule.input_perm.size() != m.in_dim() ||
        rule.hidden_perms.size() + 1 != m.layers.size() ||
        rule.output_perm.size() != m.out_dim())
        throw ShapeError("shuffle_mlp: rule does not match model shape");
    MlpModel out;
    const IndexPerm* col = &rule.input_perm;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const IndexPerm& row = l + 1 < m.layers.size() ? rule.hidden_perms[l] : rule.output_perm;
        out.layers.push_back(shuffle_linear(m.layers[l], row, *col));
        col = l + 1 < m.layers.size() ? &rule.hidden_perms[l] : nullptr;
    }
    return out;
}

inline MlpModel unshuffle_mlp(const MlpModel& m, const ShuffleRule& rule) {
    return shuffle_mlp(m, invert_rule(rule));
}

// W_hh rows and columns must move together: both index the same hidden state.
inline RnnModel shuffle_rnn(const RnnModel& m, const ShuffleRule& rule) {
    if (rule.input_perm.size() != m.input_dim() || rule.hidden_perms.size() != 1 ||
        rule.hidden_perms[0].size() != m.hidden_dim() || rule.output_perm.size() != m.classes())
        throw ShapeError("shuffle_rnn: rule does not match model shape");
    const IndexPerm& hp = rule.hidden_perms[0];
    RnnModel out;
    out.w_ih = gather_rows(gather_cols(m.w_ih, rule.input_perm), hp);
    out.w_hh = gather_rows(gather_cols(m.w_hh, hp), hp);
    out.b_h = apply_perm(m.b_h, hp);
    out.head = shuffle_linear(m.head, rule.output_perm, hp);
    return out;
}

inline RnnModel unshuffle_rnn(const RnnModel& m, const ShuffleRule& rule) {
    return shuffle_rnn(m, invert_rule(rule));
}

// Intra-token: embedding columns follow the within-token pixel order.
// Inter-token: positional rows follow the token order and the classification
// head's input columns move in blocks of hidden size (flatten order), since
// that is the only place token order is observable. Attention and FFN weights
// stay untouched; their computation is token-order equivariant.
inline TinyTransformer shuffle_transformer(const TinyTransformer& m, const ShuffleRule& rule) {
    if (rule.intra_perm.size() != m.patch_dim() || rule.token_perm.size() != m.n_tokens() ||
        rule.output_perm.size() != m.classes())
        throw ShapeError("shuffle_transformer: rule does not match model shape");
    TinyTransformer out = m;
    out.embed.W = gather_cols(m.embed.W, rule.intra_perm);
    out.pos = gather_rows(m.pos, rule.token_perm);

    const std::size_t h = m.hidden_dim();
    IndexPerm head_cols;
    head_cols.idx.resize(m.n_tokens() * h);
    for (std::size_t t = 0; t < m.n_tokens(); ++t)
        for (std::size_t j = 0; j < h; ++j) head_cols.idx[t * h + j] = rule.token_perm[t] * h + j;
    out.head.W = gather_rows(gather_cols(m.head.W, head_cols), rule.output_perm);
    out.head.b = apply_perm(m.head.b, rule.output_perm);
    return out;
}

inline TinyTransformer unshuffle_transformer(const TinyTransformer& m, const ShuffleRule& rule) {
    return shuffle_transformer(m, invert_rule(rule));
}

}  // namespace tazza
