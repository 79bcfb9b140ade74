#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tazza/errors.hpp"
#include "tazza/mat.hpp"
#include "tazza/rng.hpp"

namespace tazza {

// Affine layer computing x*W^T + b, with W stored (out_dim x in_dim).
struct LinearLayer {
    Mat W;
    Vec b;

    std::size_t in_dim() const { return W.cols; }
    std::size_t out_dim() const { return W.rows; }
    bool operator==(const LinearLayer& o) const { return W == o.W && b == o.b; }
};

inline Mat linear_forward(const LinearLayer& l, const Mat& x) {
    if (x.cols != l.in_dim()) throw ShapeError("linear_forward: input dim mismatch");
    return add_row_broadcast(matmul(x, transpose(l.W)), l.b);
}

// Feed-forward classifier with relu hidden activations and raw logits out.
struct MlpModel {
    std::vector<LinearLayer> layers;

    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }
    bool operator==(const MlpModel& o) const { return layers == o.layers; }
};

// Single-layer tanh recurrence h_t = tanh(x_t*W_ih^T + h_{t-1}*W_hh^T + b_h)
// with a linear classification head over the final hidden state.
struct RnnModel {
    Mat w_ih;   // hidden x input
    Mat w_hh;   // hidden x hidden
    Vec b_h;    // hidden
    LinearLayer head;

    std::size_t input_dim() const { return w_ih.cols; }
    std::size_t hidden_dim() const { return w_ih.rows; }
    std::size_t classes() const { return head.out_dim(); }
    bool operator==(const RnnModel& o) const {
        return w_ih == o.w_ih && w_hh == o.w_hh && b_h == o.b_h && head == o.head;
    }
};

// Minimal single-head, single-block encoder used for shuffling verification
// only (forward pass, no training). The classification head consumes the
// row-major flattened encoded sequence, so token order is observable there.
struct TinyTransformer {
    LinearLayer embed;   // hidden x patch_dim
    Mat pos;             // n_tokens x hidden
    Mat w_q, w_k, w_v, w_o;  // hidden x hidden
    LinearLayer ff1;     // ff_dim x hidden
    LinearLayer ff2;     // hidden x ff_dim
    LinearLayer head;    // classes x (n_tokens*hidden)

    std::size_t n_tokens() const { return pos.rows; }
    std::size_t patch_dim() const { return embed.in_dim(); }
    std::size_t hidden_dim() const { return pos.cols; }
    std::size_t classes() const { return head.out_dim(); }
    bool operator==(const TinyTransformer& o) const {
        return embed == o.embed && pos == o.pos && w_q == o.w_q && w_k == o.w_k &&
               w_v == o.w_v && w_o == o.w_o && ff1 == o.ff1 && ff2 == o.ff2 && head == o.head;
    }
};

// ---------------------------------------------------------------------------
// Initialization: uniform(-sqrt(1/in_dim), +sqrt(1/in_dim)) per layer.

inline LinearLayer init_linear(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
    const double a = std::sqrt(1.0 / static_cast<double>(in_dim));
    LinearLayer l;
    l.W = Mat(out_dim, in_dim);
    for (double& v : l.W.data) v = rng.uniform(-a, a);
    l.b.resize(out_dim);
    for (double& v : l.b) v = rng.uniform(-a, a);
    return l;
}

inline Mat init_mat(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
    const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
    Mat m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-a, a);
    return m;
}

// dims = {in, hidden..., classes}
inline MlpModel init_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
    if (dims.size() < 2) throw DegenerateInputError("init_mlp: need at least two dims");
    MlpModel m;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        m.layers.push_back(init_linear(dims[l + 1], dims[l], rng));
    return m;
}

inline RnnModel init_rnn(std::size_t input_dim, std::size_t hidden, std::size_t classes, Rng& rng) {
    RnnModel m;
    m.w_ih = init_mat(hidden, input_dim, input_dim, rng);
    m.w_hh = init_mat(hidden, hidden, hidden, rng);
    const double a = std::sqrt(1.0 / static_cast<double>(hidden));
    m.b_h.resize(hidden);
    for (double& v : m.b_h) v = rng.uniform(-a, a);
    m.head = init_linear(classes, hidden, rng);
    return m;
}

inline TinyTransformer init_transformer(std::size_t n_tokens, std::size_t patch_dim,
                                        std::size_t hidden, std::size_t classes, Rng& rng) {
    TinyTransformer t;
    t.embed = init_linear(hidden, patch_dim, rng);
    t.pos = init_mat(n_tokens, hidden, hidden, rng);
    t.w_q = init_mat(hidden, hidden, hidden, rng);
    t.w_k = init_mat(hidden, hidden, hidden, rng);
    t.w_v = init_mat(hidden, hidden, hidden, rng);
    t.w_o = init_mat(hidden, hidden, hidden, rng);
    t.ff1 = init_linear(2 * hidden, hidden, rng);
    t.ff2 = init_linear(hidden, 2 * hidden, rng);
    t.head = init_linear(classes, n_tokens * hidden, rng);
    return t;
}

// ---------------------------------------------------------------------------
// Forward passes.

inline Mat forward_mlp(const MlpModel& m, const Mat& x) {
    Mat h = x;
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) h = relu(linear_forward(m.layers[l], h));
    return linear_forward(m.layers.back(), h);
}

inline Mat forward_rnn(const RnnModel& m, const std::vector<Mat>& steps) {
    if (steps.empty()) throw DegenerateInputError("forward_rnn: empty sequence");
    Mat h(steps.front().rows, m.hidden_dim());  // h_0 = 0
    const Mat w_ih_t = transpose(m.w_ih);
    const Mat w_hh_t = transpose(m.w_hh);
    for (const Mat& x : steps) {
        if (x.cols != m.input_dim() || x.rows != h.rows)
            throw ShapeError("forward_rnn: step shape mismatch");
        h = tanh_mat(add_row_broadcast(add(matmul(x, w_ih_t), matmul(h, w_hh_t)), m.b_h));
    }
    return linear_forward(m.head, h);
}

// Single sample: tokens is (n_tokens x patch_dim). Returns class logits.
inline Vec forward_transformer(const TinyTransformer& m, const Mat& tokens) {
    if (tokens.rows != m.n_tokens() || tokens.cols != m.patch_dim())
        throw ShapeError("forward_transformer: token shape mismatch");
    Mat e = add(linear_forward(m.embed, tokens), m.pos);
    const Mat q = matmul(e, m.w_q);
    const Mat k = matmul(e, m.w_k);
    const Mat v = matmul(e, m.w_v);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(m.hidden_dim()));
    Mat attn = softmax_rows(scale(matmul(q, transpose(k)), inv_scale));
    Mat z = add(e, matmul(matmul(attn, v), m.w_o));
    z = add(z, linear_forward(m.ff2, relu(linear_forward(m.ff1, z))));
    // row-major flatten over token order
    Mat flat(1, z.rows * z.cols, z.data);
    Mat logits = linear_forward(m.head, flat);
    return logits.data;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy and gradients.

struct SoftmaxCe {
    Mat probs;
    double loss = 0.0;
};

inline SoftmaxCe softmax_ce(const Mat& logits, const std::vector<int>& labels) {
    if (labels.size() != logits.rows) throw ShapeError("softmax_ce: label count mismatch");
    SoftmaxCe r;
    r.probs = softmax_rows(logits);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols)
            throw DegenerateInputError("softmax_ce: label out of range");
        total += -std::log(r.probs(i, static_cast<std::size_t>(y)));
    }
    r.loss = total / static_cast<double>(logits.rows);
    return r;
}

struct MlpGrads {
    std::vector<Mat> dW;
    std::vector<Vec> db;
    double loss = 0.0;
};

inline Vec col_sums(const Mat& m) {
    Vec s(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) s[j] += m(i, j);
    return s;
}

// Mean-reduced softmax cross-entropy backprop through every layer.
inline MlpGrads backward_mlp(const MlpModel& m, const Mat& x, const std::vector<int>& labels) {
    const std::size_t n_layers = m.layers.size();
    std::vector<Mat> acts;  // acts[l] = input to layer l
    acts.reserve(n_layers);
    acts.push_back(x);
    for (std::size_t l = 0; l + 1 < n_layers; ++l)
        acts.push_back(relu(linear_forward(m.layers[l], acts.back())));
    const Mat logits = linear_forward(m.layers.back(), acts.back());

    const SoftmaxCe ce = softmax_ce(logits, labels);
    const double inv_batch = 1.0 / static_cast<double>(x.rows);
    Mat dz = ce.probs;
    for (std::size_t i = 0; i < dz.rows; ++i) {
        dz(i, static_cast<std::size_t>(labels[i])) -= 1.0;
        for (std::size_t j = 0; j < dz.cols; ++j) dz(i, j) *= inv_batch;
    }

    MlpGrads g;
    g.loss = ce.loss;
    g.dW.resize(n_layers);
    g.db.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        g.dW[l] = matmul(transpose(dz), acts[l]);
        g.db[l] = col_sums(dz);
        if (l == 0) break;
        Mat dh = matmul(dz, m.layers[l].W);
        // relu mask: activation > 0 iff pre-activation > 0
        for (std::size_t i = 0; i < dh.data.size(); ++i)
            if (acts[l].data[i] <= 0.0) dh.data[i] = 0.0;
        dz = std::move(dh);
    }
    return g;
}

struct RnnGrads {
    Mat dw_ih, dw_hh;
    Vec db_h;
    Mat dhead_W;
    Vec dhead_b;
    double loss = 0.0;
};

// Full backpropagation through time; gradients accumulate across steps.
inline RnnGrads backward_rnn(const RnnModel& m, const std::vector<Mat>& steps,
                             const std::vector<int>& labels) {
    if (steps.empty()) throw DegenerateInputError("backward_rnn: empty sequence");
    const std::size_t batch = steps.front().rows;
    const std::size_t hidden = m.hidden_dim();
    const Mat w_ih_t = transpose(m.w_ih);
    const Mat w_hh_t = transpose(m.w_hh);

    std::vector<Mat> hs;  // hs[t] = hidden state after step t; hs[0] = 0
    hs.reserve(steps.size() + 1);
    hs.emplace_back(batch, hidden);
    for (const Mat& x : steps)
        hs.push_back(tanh_mat(
            add_row_broadcast(add(matmul(x, w_ih_t), matmul(hs.back(), w_hh_t)), m.b_h)));

    const Mat logits = linear_forward(m.head, hs.back());
    const SoftmaxCe ce = softmax_ce(logits, labels);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    Mat dz = ce.probs;
    for (std::size_t i = 0; i < dz.rows; ++i) {
        dz(i, static_cast<std::size_t>(labels[i])) -= 1.0;
        for (std::size_t j = 0; j < dz.cols; ++j) dz(i, j) *= inv_batch;
    }

    RnnGrads g;
    g.loss = ce.loss;
    g.dhead_W = matmul(transpose(dz), hs.back());
    g.dhead_b = col_sums(dz);
    g.dw_ih = Mat(hidden, m.input_dim());
    g.dw_hh = Mat(hidden, hidden);
    g.db_h.assign(hidden, 0.0);

    Mat dh = matmul(dz, m.head.W);
    for (std::size_t t = steps.size(); t-- > 0;) {
        // through tanh: delta = dh * (1 - h^2)
        Mat delta = dh;
        const Mat& h = hs[t + 1];
        for (std::size_t i = 0; i < delta.data.size(); ++i)
            delta.data[i] *= 1.0 - h.data[i] * h.data[i];
        g.dw_ih = add(g.dw_ih, matmul(transpose(delta), steps[t]));
        g.dw_hh = add(g.dw_hh, matmul(transpose(delta), hs[t]));
        const Vec ds = col_sums(delta);
        for (std::size_t i = 0; i < hidden; ++i) g.db_h[i] += ds[i];
        dh = matmul(delta, m.w_hh);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Adam over flat parameter views.

struct ParamView {
    double* p = nullptr;
    std::size_t n = 0;
};

inline std::vector<ParamView> collect_params(MlpModel& m) {
    std::vector<ParamView> v;
    for (LinearLayer& l : m.layers) {
        v.push_back({l.W.data.data(), l.W.data.size()});
        v.push_back({l.b.data(), l.b.size()});
    }
    return v;
}

inline std::vector<ParamView> collect_params(RnnModel& m) {
    return {{m.w_ih.data.data(), m.w_ih.data.size()},
            {m.w_hh.data.data(), m.w_hh.data.size()},
            {m.b_h.data(), m.b_h.size()},
            {m.head.W.data.data(), m.head.W.data.size()},
            {m.head.b.data(), m.head.b.size()}};
}

inline std::vector<ParamView> collect_grads(MlpGrads& g) {
    std::vector<ParamView> v;
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
        v.push_back({g.dW[l].data.data(), g.dW[l].data.size()});
        v.push_back({g.db[l].data(), g.db[l].size()});
    }
    return v;
}

inline std::vector<ParamView> collect_grads(RnnGrads& g) {
    return {{g.dw_ih.data.data(), g.dw_ih.data.size()},
            {g.dw_hh.data.data(), g.dw_hh.data.size()},
            {g.db_h.data(), g.db_h.size()},
            {g.dhead_W.data.data(), g.dhead_W.data.size()},
            {g.dhead_b.data(), g.dhead_b.size()}};
}

struct AdamState {
    std::vector<Vec> m, v;
    std::uint64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState for_params(const std::vector<ParamView>& params) {
        AdamState s;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const ParamView& p : params) {
            s.m.emplace_back(p.n, 0.0);
            s.v.emplace_back(p.n, 0.0);
        }
        return s;
    }
};

inline void adam_step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
                      AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: parameter/gradient/state count mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].n != grads[k].n || params[k].n != state.m[k].size())
            throw ShapeError("adam_step: shape mismatch");
        double* p = params[k].p;
        const double* g = grads[k].p;
        Vec& m = state.m[k];
        Vec& v = state.v[k];
        for (std::size_t i = 0; i < params[k].n; ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Local training: epochs of shuffled mini-batches with Adam. The batch order
// comes exclusively from the provided rng stream, so one client's schedule
// never depends on another's configuration.

struct TrainOptions {
    std::size_t epochs = 5;
    std::size_t batch_size = 64;
    double lr = 1e-3;
};

inline Mat take_rows(const Mat& m, const std::vector<std::size_t>& idx,
                     std::size_t begin, std::size_t end) {
    Mat out(end - begin, m.cols);
    for (std::size_t r = begin; r < end; ++r)
        for (std::size_t j = 0; j < m.cols; ++j) out(r - begin, j) = m(idx[r], j);
    return out;
}

inline void train_local(MlpModel& model, const Mat& x, const std::vector<int>& y,
                        const TrainOptions& opt, Rng& rng) {
    if (x.rows == 0) throw DegenerateInputError("train_local: empty shard");
    if (x.rows != y.size()) throw ShapeError("train_local: sample/label count mismatch");
    auto params = collect_params(model);
    AdamState state = AdamState::for_params(params);
    std::vector<std::size_t> idx(x.rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t e = 0; e < opt.epochs; ++e) {
        rng.shuffle(idx);
        for (std::size_t b = 0; b < idx.size(); b += opt.batch_size) {
            const std::size_t hi = std::min(idx.size(), b + opt.batch_size);
            Mat xb = take_rows(x, idx, b, hi);
            std::vector<int> yb(hi - b);
            for (std::size_t r = b; r < hi; ++r) yb[r - b] = y[idx[r]];
            MlpGrads g = backward_mlp(model, xb, yb);
            adam_step(params, collect_grads(g), state, opt.lr);
        }
    }
}

inline void train_local(RnnModel& model, const std::vector<Mat>& steps, const std::vector<int>& y,
                        const TrainOptions& opt, Rng& rng) {
    if (steps.empty() || steps.front().rows == 0)
        throw DegenerateInputError("train_local: empty shard");
    if (steps.front().rows != y.size()) throw ShapeError("train_local: sample/label count mismatch");
    auto params = collect_params(model);
    AdamState state = AdamState::for_params(params);
    std::vector<std::size_t> idx(steps.front().rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t e = 0; e < opt.epochs; ++e) {
        rng.shuffle(idx);
        for (std::size_t b = 0; b < idx.size(); b += opt.batch_size) {
            const std::size_t hi = std::min(idx.size(), b + opt.batch_size);
            std::vector<Mat> xb(steps.size());
            for (std::size_t t = 0; t < steps.size(); ++t) xb[t] = take_rows(steps[t], idx, b, hi);
            std::vector<int> yb(hi - b);
            for (std::size_t r = b; r < hi; ++r) yb[r - b] = y[idx[r]];
            RnnGrads g = backward_rnn(model, xb, yb);
            adam_step(params, collect_grads(g), state, opt.lr);
        }
    }
}

// ---------------------------------------------------------------------------
// Flat parameter carrier exchanged in FL rounds. Biases travel as 1 x n Mats
// so aggregation code can treat every tensor uniformly.

enum class Arch { mlp, rnn, transformer };

struct ModelParams {
    Arch arch = Arch::mlp;
    std::vector<Mat> tensors;

    std::size_t entry_count() const {
        std::size_t n = 0;
        for (const Mat& t : tensors) n += t.data.size();
        return n;
    }
    bool operator==(const ModelParams& o) const { return arch == o.arch && tensors == o.tensors; }
};

inline Mat vec_as_row(const Vec& v) { return Mat(1, v.size(), v); }

inline ModelParams to_params(const MlpModel& m) {
    ModelParams p;
    p.arch = Arch::mlp;
    for (const LinearLayer& l : m.layers) {
        p.tensors.push_back(l.W);
        p.tensors.push_back(vec_as_row(l.b));
    }
    return p;
}

inline MlpModel mlp_from_params(const ModelParams& p) {
    if (p.arch != Arch::mlp || p.tensors.size() % 2 != 0 || p.tensors.empty())
        throw ShapeError("mlp_from_params: not an MLP parameter set");
    MlpModel m;
    for (std::size_t i = 0; i < p.tensors.size(); i += 2)
        m.layers.push_back({p.tensors[i], p.tensors[i + 1].data});
    return m;
}

inline ModelParams to_params(const RnnModel& m) {
    ModelParams p;
    p.arch = Arch::rnn;
    p.tensors = {m.w_ih, m.w_hh, vec_as_row(m.b_h), m.head.W, vec_as_row(m.head.b)};
    return p;
}

inline RnnModel rnn_from_params(const ModelParams& p) {
    if (p.arch != Arch::rnn || p.tensors.size() != 5)
        throw ShapeError("rnn_from_params: not an RNN parameter set");
    RnnModel m;
    m.w_ih = p.tensors[0];
    m.w_hh = p.tensors[1];
    m.b_h = p.tensors[2].data;
    m.head = {p.tensors[3], p.tensors[4].data};
    return m;
}

// Forward through a parameter set. RNN probe rows arrive flattened as T*d;
// they are re-cut into steps using the model's input dimension.
inline Mat forward_params(const ModelParams& p, const Mat& x) {
    if (p.arch == Arch::mlp) return forward_mlp(mlp_from_params(p), x);
    if (p.arch == Arch::rnn) {
        const RnnModel m = rnn_from_params(p);
        const std::size_t d = m.input_dim();
        if (d == 0 || x.cols % d != 0) throw ShapeError("forward_params: bad flattened sequence");
        const std::size_t t_steps = x.cols / d;
        std::vector<Mat> steps(t_steps, Mat(x.rows, d));
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t t = 0; t < t_steps; ++t)
                for (std::size_t j = 0; j < d; ++j) steps[t](i, j) = x(i, t * d + j);
        return forward_rnn(m, steps);
    }
    throw ShapeError("forward_params: unsupported architecture");
}

inline double accuracy(const Mat& logits, const std::vector<int>& y) {
    const std::vector<std::size_t> pred = argmax_rows(logits);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (pred[i] == static_cast<std::size_t>(y[i])) ++hit;
    return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace tazza
