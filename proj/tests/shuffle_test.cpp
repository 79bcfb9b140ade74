#include "tazza/shuffle.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "tazza/rng.hpp"

using namespace tazza;

namespace {

Mat random_mat(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Mat m(r, c);
    for (double& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        mx = std::max(mx, std::abs(a.data[i] - b.data[i]));
    return mx;
}

double max_abs_diff(const Vec& a, const Vec& b) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
    return mx;
}

}  // namespace

TEST(ShuffleInput, IdentityRuleLeavesInput) {
    Rng rng(1);
    Mat x = random_mat(3, 6, rng);
    ShuffleRule rule = identity_rule(ModelShape::mlp({6, 4, 2}));
    EXPECT_EQ(shuffle_input(x, rule), x);
}

TEST(ShuffleInput, IndexOracle) {
    Mat x(1, 3, {1.0, 2.0, 3.0});  // [a,b,c]
    ShuffleRule rule;
    rule.input_perm = IndexPerm{{2, 0, 1}};
    EXPECT_EQ(shuffle_input(x, rule), Mat(1, 3, {3.0, 1.0, 2.0}));
}

TEST(ShuffleInput, RowMultisetPreserved) {
    Rng rng(2);
    Mat x = random_mat(4, 9, rng);
    ShuffleRule rule = derive_rule(123, ModelShape::mlp({9, 3, 2}));
    Mat s = shuffle_input(x, rule);
    for (std::size_t i = 0; i < x.rows; ++i) {
        Vec a(x.row(i), x.row(i) + x.cols), b(s.row(i), s.row(i) + s.cols);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
    }
    EXPECT_EQ(unshuffle_input(s, rule), x);
}

TEST(ShuffleLinear, SpecExample) {
    LinearLayer l{Mat(2, 2, {1, 2, 3, 4}), Vec{5, 6}};
    IndexPerm swap{{1, 0}};
    LinearLayer s = shuffle_linear(l, swap, swap);
    EXPECT_EQ(s.W, Mat(2, 2, {4, 3, 2, 1}));
    EXPECT_EQ(s.b, (Vec{6, 5}));
}

TEST(ShuffleLinear, IdentityPermsLeaveLayer) {
    Rng rng(3);
    LinearLayer l{random_mat(4, 3, rng), {0.1, 0.2, 0.3, 0.4}};
    LinearLayer s = shuffle_linear(l, IndexPerm::identity(4), IndexPerm::identity(3));
    EXPECT_EQ(s, l);
}

TEST(ShuffleLinear, InverseRoundTripExact) {
    Rng rng(4);
    LinearLayer l{random_mat(5, 7, rng), Vec(5, 0.5)};
    IndexPerm row = gen_perm(9, 0, 5), col = gen_perm(9, 1, 7);
    LinearLayer back = shuffle_linear(shuffle_linear(l, row, col), invert_perm(row), invert_perm(col));
    EXPECT_EQ(back, l);
}

TEST(ShuffleLinear, SizeMismatchThrows) {
    LinearLayer l{Mat(2, 3), Vec(2, 0.0)};
    EXPECT_THROW(shuffle_linear(l, IndexPerm::identity(3), IndexPerm::identity(3)), ShapeError);
}

TEST(ShuffleMlp, EquivarianceOverRandomTriples) {
    Rng rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> dims{2 + rng.uniform_index(8)};
        const std::size_t n_hidden = 1 + rng.uniform_index(2);
        for (std::size_t l = 0; l < n_hidden; ++l) dims.push_back(2 + rng.uniform_index(10));
        dims.push_back(2 + rng.uniform_index(6));
        MlpModel m = init_mlp(dims, rng);
        ShuffleRule rule = derive_rule(rng.next_u64(), shape_of(m));
        Mat x = random_mat(1 + rng.uniform_index(4), dims.front(), rng);

        Mat shuffled_out = forward_mlp(shuffle_mlp(m, rule), shuffle_input(x, rule));
        Mat expect = gather_cols(forward_mlp(m, x), rule.output_perm);
        worst = std::max(worst, max_abs_diff(shuffled_out, expect));
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(ShuffleMlp, IdentityRuleIsBitIdentical) {
    Rng rng(6);
    MlpModel m = init_mlp({5, 4, 3}, rng);
    EXPECT_EQ(shuffle_mlp(m, identity_rule(shape_of(m))), m);
}

TEST(ShuffleMlp, RoundTripBitExact) {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        MlpModel m = init_mlp({1 + rng.uniform_index(9), 1 + rng.uniform_index(9),
                               2 + rng.uniform_index(5)},
                              rng);
        ShuffleRule rule = derive_rule(rng.next_u64(), shape_of(m));
        EXPECT_EQ(unshuffle_mlp(shuffle_mlp(m, rule), rule), m);
    }
}

TEST(ShuffleRnn, EquivarianceOverRandomTriples) {
    Rng rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + rng.uniform_index(6), h = 2 + rng.uniform_index(8),
                          c = 2 + rng.uniform_index(5), t_steps = 1 + rng.uniform_index(4),
                          batch = 1 + rng.uniform_index(3);
        RnnModel m = init_rnn(d, h, c, rng);
        ShuffleRule rule = derive_rule(rng.next_u64(), shape_of(m));
        std::vector<Mat> steps;
        for (std::size_t t = 0; t < t_steps; ++t) steps.push_back(random_mat(batch, d, rng));

        Mat shuffled_out = forward_rnn(shuffle_rnn(m, rule), shuffle_seq_input(steps, rule));
        Mat expect = gather_cols(forward_rnn(m, steps), rule.output_perm);
        worst = std::max(worst, max_abs_diff(shuffled_out, expect));
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(ShuffleRnn, IdentityRuleIsBitIdentical) {
    Rng rng(9);
    RnnModel m = init_rnn(4, 5, 3, rng);
    EXPECT_EQ(shuffle_rnn(m, identity_rule(shape_of(m))), m);
}

TEST(ShuffleRnn, MismatchedRecurrentPermsBreakInvariance) {
    // Negative control: shuffling W_hh rows and columns with different perms
    // must break function preservation.
    Rng rng(10);
    RnnModel m = init_rnn(5, 6, 3, rng);
    ShuffleRule rule = derive_rule(42, shape_of(m));
    RnnModel s = shuffle_rnn(m, rule);
    // overwrite W_hh with a mismatched column perm
    IndexPerm other = gen_perm(43, 99, 6);
    s.w_hh = gather_rows(gather_cols(m.w_hh, other), rule.hidden_perms[0]);

    std::vector<Mat> steps{random_mat(2, 5, rng), random_mat(2, 5, rng)};
    Mat got = forward_rnn(s, shuffle_seq_input(steps, rule));
    Mat expect = gather_cols(forward_rnn(m, steps), rule.output_perm);
    EXPECT_GT(max_abs_diff(got, expect), 1e-3);
}

TEST(ShuffleRnn, RoundTripBitExact) {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        RnnModel m = init_rnn(1 + rng.uniform_index(6), 1 + rng.uniform_index(8),
                              2 + rng.uniform_index(5), rng);
        ShuffleRule rule = derive_rule(rng.next_u64(), shape_of(m));
        EXPECT_EQ(unshuffle_rnn(shuffle_rnn(m, rule), rule), m);
    }
}

TEST(ShuffleTransformer, EquivarianceOverRandomTriples) {
    Rng rng(12);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t tokens = 2 + rng.uniform_index(4), p = 2 + rng.uniform_index(6),
                          h = 4 + rng.uniform_index(8), c = 2 + rng.uniform_index(5);
        TinyTransformer m = init_transformer(tokens, p, h, c, rng);
        ShuffleRule rule = derive_rule(rng.next_u64(), shape_of(m));
        Mat x = random_mat(tokens, p, rng);

        Vec got = forward_transformer(shuffle_transformer(m, rule), shuffle_input(x, rule));
        Vec expect = apply_perm(forward_transformer(m, x), rule.output_perm);
        worst = std::max(worst, max_abs_diff(got, expect));
    }
    EXPECT_LE(worst, 1e-6);
}

TEST(ShuffleTransformer, IdentityRuleIsBitIdentical) {
    Rng rng(13);
    TinyTransformer m = init_transformer(3, 4, 6, 2, rng);
    EXPECT_EQ(shuffle_transformer(m, identity_rule(shape_of(m))), m);
}

TEST(ShuffleTransformer, TokenPermWithoutHeadBlockPermBreaks) {
    Rng rng(14);
    TinyTransformer m = init_transformer(4, 5, 8, 3, rng);
    ShuffleRule rule = derive_rule(77, shape_of(m));
    // ensure the token perm actually moves something
    ASSERT_FALSE(rule.token_perm.is_identity());
    TinyTransformer s = shuffle_transformer(m, rule);
    s.head = m.head;  // drop the head block permutation (and output perm)
    Mat x = random_mat(4, 5, rng);
    Vec got = forward_transformer(s, shuffle_input(x, rule));
    Vec expect = forward_transformer(m, x);
    EXPECT_GT(max_abs_diff(got, expect), 1e-6);
}

TEST(ShuffleTransformer, RoundTripBitExact) {
    Rng rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        TinyTransformer m = init_transformer(2 + rng.uniform_index(4), 2 + rng.uniform_index(5),
                                             4 + rng.uniform_index(6), 2 + rng.uniform_index(4), rng);
        ShuffleRule rule = derive_rule(rng.next_u64(), shape_of(m));
        EXPECT_EQ(unshuffle_transformer(shuffle_transformer(m, rule), rule), m);
    }
}

TEST(ShuffleRule, DerivationIsDeterministic) {
    ModelShape shape = ModelShape::mlp({12, 7, 5, 3});
    EXPECT_EQ(derive_rule(999, shape), derive_rule(999, shape));
    EXPECT_FALSE(derive_rule(999, shape) == derive_rule(1000, shape));
}

TEST(ShuffleRule, AddingLayersKeepsEarlierPerms) {
    ShuffleRule a = derive_rule(5, ModelShape::mlp({10, 8, 4}));
    ShuffleRule b = derive_rule(5, ModelShape::mlp({10, 8, 6, 4}));
    EXPECT_EQ(a.input_perm, b.input_perm);
    EXPECT_EQ(a.hidden_perms[0], b.hidden_perms[0]);
}

namespace {

ModelParams weighted_average(const std::vector<ModelParams>& models, const std::vector<double>& w) {
    ModelParams out = models.front();
    for (Mat& t : out.tensors)
        for (double& v : t.data) v = 0.0;
    double total = 0.0;
    for (double x : w) total += x;
    for (std::size_t k = 0; k < models.size(); ++k)
        for (std::size_t t = 0; t < out.tensors.size(); ++t)
            for (std::size_t i = 0; i < out.tensors[t].data.size(); ++i)
                out.tensors[t].data[i] += (w[k] / total) * models[k].tensors[t].data[i];
    return out;
}

}  // namespace

TEST(ShuffleMlp, AggregationCommutesWithShuffle) {
    Rng rng(16);
    for (std::size_t count : {4u, 5u}) {  // power of two and not
        std::vector<std::size_t> dims{6, 5, 3};
        ShuffleRule rule = derive_rule(rng.next_u64(), ModelShape::mlp(dims));
        std::vector<ModelParams> originals, shuffled;
        std::vector<double> w;
        for (std::size_t k = 0; k < count; ++k) {
            MlpModel m = init_mlp(dims, rng);
            originals.push_back(to_params(m));
            shuffled.push_back(to_params(shuffle_mlp(m, rule)));
            w.push_back(1.0 + static_cast<double>(k));
        }
        ModelParams avg_then_shuffle = to_params(shuffle_mlp(mlp_from_params(weighted_average(originals, w)), rule));
        ModelParams shuffle_then_avg = weighted_average(shuffled, w);
        const double tol = count == 4u ? 0.0 : 1e-12;
        for (std::size_t t = 0; t < avg_then_shuffle.tensors.size(); ++t)
            EXPECT_LE(max_abs_diff(avg_then_shuffle.tensors[t], shuffle_then_avg.tensors[t]), tol);
    }
}
