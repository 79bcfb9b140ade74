#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tazza/assignment.hpp"
#include "tazza/datasets.hpp"
#include "tazza/errors.hpp"
#include "tazza/nn.hpp"
#include "tazza/rng.hpp"
#include "tazza/shuffle.hpp"

namespace tazza {

enum class AttackKind { none, label_flip, noise_inject, backdoor };

// Trigger patch written into the original pixel space before any shuffling;
// the attacker only controls its own local training data.
struct PatchSpec {
    std::size_t top = 0, left = 0;
    std::size_t height = 4, width = 4;
    double fill = 1.0;
    int target = 0;
};

struct AttackSpec {
    AttackKind kind = AttackKind::none;
    std::vector<int> flip_map;      // empty = default (y+1) mod classes
    double noise_scale = 0.25;
    PatchSpec patch;
    double poison_fraction = 0.5;
};

inline std::vector<int> default_flip_map(int classes) {
    std::vector<int> map(classes);
    for (int c = 0; c < classes; ++c) map[c] = (c + 1) % classes;
    return map;
}

// ---------------------------------------------------------------------------
// Integrity attacks.

inline Dataset flip_labels(Dataset shard, const std::vector<int>& flip_map) {
    for (int& label : shard.y) {
        if (label < 0 || static_cast<std::size_t>(label) >= flip_map.size())
            throw DegenerateInputError("flip_labels: label outside flip map domain");
        label = flip_map[label];
    }
    return shard;
}

inline ModelParams inject_noise(ModelParams params, double scale, Rng& rng) {
    if (scale < 0.0) throw DegenerateInputError("inject_noise: negative scale");
    for (Mat& t : params.tensors)
        for (double& v : t.data) v += scale * rng.gaussian();
    return params;
}

inline Dataset inject_backdoor(Dataset shard, const PatchSpec& patch, double fraction, Rng& rng) {
    if (!shard.has_image_shape())
        throw DegenerateInputError("inject_backdoor: dataset has no image shape");
    if (patch.top + patch.height > shard.img_rows || patch.left + patch.width > shard.img_cols)
        throw InvariantError("inject_backdoor: patch outside image bounds");
    if (fraction < 0.0 || fraction > 1.0)
        throw DegenerateInputError("inject_backdoor: fraction outside [0,1]");
    const std::size_t n_poison =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(shard.size())));
    std::vector<std::size_t> order(shard.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t k = 0; k < n_poison; ++k) {
        const std::size_t i = order[k];
        for (std::size_t r = 0; r < patch.height; ++r)
            for (std::size_t c = 0; c < patch.width; ++c)
                shard.X(i, (patch.top + r) * shard.img_cols + (patch.left + c)) = patch.fill;
        shard.y[i] = patch.target;
    }
    return shard;
}

// Fraction of trigger-patched test inputs classified as the attacker's
// target. The model lives in shuffled space, so patched inputs are shuffled
// by the same rule before the forward pass and predictions are read through
// the inverse output permutation. Samples whose true label already equals the
// target are skipped.
inline double backdoor_accuracy(const MlpModel& model, const Dataset& test, const PatchSpec& patch,
                                int target, const ShuffleRule& rule) {
    if (!test.has_image_shape())
        throw DegenerateInputError("backdoor_accuracy: dataset has no image shape");
    Dataset patched = test;
    for (std::size_t i = 0; i < patched.size(); ++i)
        for (std::size_t r = 0; r < patch.height; ++r)
            for (std::size_t c = 0; c < patch.width; ++c)
                patched.X(i, (patch.top + r) * patched.img_cols + (patch.left + c)) = patch.fill;
    const Mat logits = forward_mlp(model, shuffle_input(patched.X, rule));
    const std::vector<std::size_t> pred = argmax_rows(logits);
    const IndexPerm out_perm = rule.output_perm;
    std::size_t counted = 0, hits = 0;
    for (std::size_t i = 0; i < patched.size(); ++i) {
        if (test.y[i] == target) continue;
        ++counted;
        // logit column j of the shuffled model holds original class out_perm[j]
        if (static_cast<int>(out_perm[pred[i]]) == target) ++hits;
    }
    return counted == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(counted);
}

// ---------------------------------------------------------------------------
// Confidentiality attack oracles.

// Batch-1 first-layer reconstruction: dL/dW1 = delta * x^T and dL/db1 = delta,
// so dividing the strongest row of the weight gradient by its bias gradient
// recovers the input (in whatever space the model consumes).
inline Vec analytic_gradient_leak(const Mat& grad_w1, const Vec& grad_b1) {
    if (grad_w1.rows != grad_b1.size())
        throw ShapeError("analytic_gradient_leak: gradient shapes disagree");
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t i = 0; i < grad_b1.size(); ++i) {
        const double mag = std::abs(grad_b1[i]);
        if (mag > best_mag) {
            best_mag = mag;
            best = i;
        }
    }
    if (best_mag < 1e-12)
        throw NoLeakableRowError("analytic_gradient_leak: all bias gradients vanish");
    Vec x(grad_w1.cols);
    for (std::size_t j = 0; j < grad_w1.cols; ++j) x[j] = grad_w1(best, j) / grad_b1[best];
    return x;
}

// Parameter-based shuffling-rule inference: the honest-but-curious server
// matches columns of the uploaded first-layer weights against its reference
// copy by squared distance, solved as an exact assignment problem.
inline IndexPerm infer_rule_by_assignment(const ModelParams& shuffled,
                                          const ModelParams& reference) {
    if (shuffled.tensors.empty() || reference.tensors.empty() ||
        !shuffled.tensors[0].same_shape(reference.tensors[0]))
        throw ShapeError("infer_rule_by_assignment: first-layer shapes disagree");
    const Mat& a = shuffled.tensors[0];
    const Mat& b = reference.tensors[0];
    const std::size_t d = a.cols;
    Mat cost(d, d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.rows; ++i) {
                const double diff = a(i, j) - b(i, k);
                s += diff * diff;
            }
            cost(j, k) = s;
        }
    IndexPerm inferred;
    inferred.idx = solve_assignment(cost);
    return inferred;
}

inline double mean_index_displacement(const IndexPerm& inferred, const IndexPerm& truth) {
    if (inferred.size() != truth.size())
        throw ShapeError("mean_index_displacement: length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < inferred.size(); ++i) {
        const double diff = static_cast<double>(inferred[i]) - static_cast<double>(truth[i]);
        total += std::abs(diff);
    }
    return total / static_cast<double>(inferred.size());
}

// ---------------------------------------------------------------------------
// Per-update confidentiality defenses (baselines).

// Zeros the smallest |entries| across the whole update; ties broken by
// (tensor index, flat index) ascending.
inline ModelParams gradient_prune(ModelParams delta, double ratio) {
    if (ratio < 0.0 || ratio >= 1.0)
        throw DegenerateInputError("gradient_prune: ratio outside [0,1)");
    const std::size_t total = delta.entry_count();
    const std::size_t n_zero = static_cast<std::size_t>(ratio * static_cast<double>(total));
    if (n_zero == 0) return delta;
    struct Entry {
        double mag;
        std::size_t tensor, flat;
    };
    std::vector<Entry> entries;
    entries.reserve(total);
    for (std::size_t t = 0; t < delta.tensors.size(); ++t)
        for (std::size_t i = 0; i < delta.tensors[t].data.size(); ++i)
            entries.push_back({std::abs(delta.tensors[t].data[i]), t, i});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.mag != b.mag) return a.mag < b.mag;
        if (a.tensor != b.tensor) return a.tensor < b.tensor;
        return a.flat < b.flat;
    });
    for (std::size_t k = 0; k < n_zero; ++k)
        delta.tensors[entries[k].tensor].data[entries[k].flat] = 0.0;
    return delta;
}

enum class DpLevel { S, M, L };

inline double dp_sigma_factor(DpLevel level) {
    switch (level) {
        case DpLevel::S: return 0.01;
        case DpLevel::M: return 0.05;
        case DpLevel::L: return 0.2;
    }
    return 0.0;
}

// Clip the update to a Frobenius-norm ball, then add per-entry Gaussian noise.
inline ModelParams dp_noise_with_sigma(ModelParams delta, double sigma, double clip_norm,
                                       Rng& rng) {
    if (clip_norm <= 0.0) throw DegenerateInputError("dp_noise: clip_norm must be positive");
    double sq = 0.0;
    for (const Mat& t : delta.tensors)
        for (double v : t.data) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) {
        const double s = clip_norm / norm;
        for (Mat& t : delta.tensors)
            for (double& v : t.data) v *= s;
    }
    if (sigma > 0.0)
        for (Mat& t : delta.tensors)
            for (double& v : t.data) v += sigma * rng.gaussian();
    return delta;
}

inline ModelParams dp_noise(ModelParams delta, DpLevel level, double clip_norm, Rng& rng) {
    const double sigma = dp_sigma_factor(level) * clip_norm /
                         std::sqrt(static_cast<double>(delta.entry_count()));
    return dp_noise_with_sigma(std::move(delta), sigma, clip_norm, rng);
}

}  // namespace tazza
