#include <gtest/gtest.h>

#include <cmath>

#include "emospace/guidance.hpp"
#include "oracles.hpp"

using namespace emospace;

namespace {

PrototypeBank orthonormal_bank(std::size_t k, std::size_t dim) {
    PrototypeBank bank;
    bank.prototypes = Mat(k, dim);
    for (std::size_t i = 0; i < k; ++i) bank.prototypes(i, i) = 1.0;
    bank.usage.assign(k, 0);
    return bank;
}

GuidanceConfig config(std::size_t k_pos, std::size_t k_neg, double tau = 0.1) {
    GuidanceConfig cfg;
    cfg.k_pos = k_pos;
    cfg.k_neg = k_neg;
    cfg.tau_temp = tau;
    return cfg;
}

Tensor4 random_tensor(std::size_t b, std::size_t h, std::size_t r, std::size_t c, Rng& rng) {
    Tensor4 t(b, h, r, c);
    for (double& x : t.data) x = rng.normal();
    return t;
}

}  // namespace

TEST(Attention, SingleKey) {
    Rng rng(1);
    AttentionInputs in{random_tensor(2, 2, 3, 4, rng), random_tensor(2, 2, 1, 4, rng), random_tensor(2, 2, 1, 5, rng)};
    const AttentionResult r = attention(in);
    for (double w : r.weights.data) EXPECT_EQ(w, 1.0);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t h = 0; h < 2; ++h)
            for (std::size_t q = 0; q < 3; ++q)
                for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(r.output.at(b, h, q, c), in.value.at(b, h, 0, c));
}

TEST(Attention, IdenticalKeysGiveUniformWeights) {
    Rng rng(2);
    AttentionInputs in{random_tensor(1, 1, 2, 3, rng), Tensor4(1, 1, 4, 3, 0.7), random_tensor(1, 1, 4, 2, rng)};
    for (double w : attention(in).weights.data) EXPECT_NEAR(w, 0.25, 1e-15);
}

TEST(Attention, HandCase) {
    AttentionInputs in{Tensor4(1, 1, 2, 1), Tensor4(1, 1, 2, 1), Tensor4(1, 1, 2, 2)};
    in.query.at(0, 0, 0, 0) = 1.0;
    in.key.at(0, 0, 0, 0) = 1.0;
    in.value.at(0, 0, 0, 0) = 1.0;
    in.value.at(0, 0, 1, 1) = 1.0;
    const AttentionResult r = attention(in);
    const oracle::LVec ref = oracle::softmax({1.0L, 0.0L}, 1.0L);
    EXPECT_NEAR(r.weights.at(0, 0, 0, 0), static_cast<double>(ref[0]), 1e-15);
    EXPECT_NEAR(r.weights.at(0, 0, 0, 0), 0.7311, 1e-4);
    EXPECT_NEAR(r.weights.at(0, 0, 0, 1), 0.2689, 1e-4);
    EXPECT_EQ(r.weights.at(0, 0, 1, 0), 0.5);
    EXPECT_NEAR(r.output.at(0, 0, 0, 0), static_cast<double>(ref[0]), 1e-15);
}

TEST(Attention, RowsSumToOneForRandomShapes) {
    Rng rng(3);
    for (std::size_t b = 1; b <= 3; ++b)
        for (std::size_t h = 1; h <= 3; ++h)
            for (std::size_t tq = 1; tq <= 3; ++tq)
                for (std::size_t tk = 1; tk <= 3; ++tk)
                    for (std::size_t dk : {1u, 4u, 16u}) {
                        AttentionInputs in{random_tensor(b, h, tq, dk, rng), random_tensor(b, h, tk, dk, rng),
                                           random_tensor(b, h, tk, 2, rng)};
                        const AttentionResult r = attention(in);
                        for (std::size_t x = 0; x < b; ++x)
                            for (std::size_t y = 0; y < h; ++y)
                                for (std::size_t q = 0; q < tq; ++q) {
                                    double s = 0;
                                    for (double w : r.weights.row(x, y, q)) s += w;
                                    EXPECT_NEAR(s, 1.0, 1e-9);
                                }
                    }
}

TEST(Attention, ShapeMismatch) {
    Rng rng(4);
    AttentionInputs in{random_tensor(1, 1, 2, 3, rng), random_tensor(1, 1, 2, 4, rng), random_tensor(1, 1, 2, 2, rng)};
    try {
        attention(in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(Guidance, SingleNearestPrototype) {
    Rng rng(5);
    const PrototypeBank bank = make_bank(8, 8, rng);
    const Vec e = gaussian_vector(8, 1.0, rng);
    const GuidanceResult r = multi_prototype_guidance(e, bank, config(1, 0));
    ASSERT_EQ(r.indices.size(), 1u);
    EXPECT_EQ(r.weights, Vec{1.0});
    EXPECT_EQ(r.indices[0], assign(e, bank).index);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(r.p_emo[c], bank.prototypes(r.indices[0], c));
    EXPECT_FALSE(r.p_neg.has_value());
}

TEST(Guidance, OrthonormalTwoPrototypes) {
    const PrototypeBank bank = orthonormal_bank(4, 4);
    const GuidanceResult r = multi_prototype_guidance(Vec{1, 0, 0, 0}, bank, config(2, 0));
    const oracle::LVec ref = oracle::softmax({1.0L, 0.0L}, 0.1L);
    EXPECT_EQ(r.indices[0], 0u);
    EXPECT_EQ(r.indices[1], 1u);  // ties among the zeros go to the lowest index
    EXPECT_NEAR(r.weights[0], static_cast<double>(ref[0]), 1e-7);
    EXPECT_NEAR(r.weights[1], static_cast<double>(ref[1]), 1e-7);
}

TEST(Guidance, NegativeSetUsesSmallestSimilarities) {
    const PrototypeBank bank = orthonormal_bank(4, 4);
    const GuidanceResult r = multi_prototype_guidance(Vec{0.9, 0.5, -0.2, -0.7}, bank, config(2, 2));
    EXPECT_EQ(r.indices, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(r.neg_indices, (std::vector<std::size_t>{3, 2}));
    const oracle::LVec ref = oracle::softmax({0.7L, 0.2L}, 0.1L);
    EXPECT_NEAR(r.neg_weights[0], static_cast<double>(ref[0]), 1e-14);
    ASSERT_TRUE(r.p_neg.has_value());
    EXPECT_NEAR((*r.p_neg)[3], static_cast<double>(ref[0]), 1e-14);

    const Vec eff = effective_guidance(r, 0.3);
    Vec manual(4);
    for (std::size_t c = 0; c < 4; ++c) manual[c] = r.p_emo[c] - 0.3 * (*r.p_neg)[c];
    const Vec expected = normalized(manual);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(eff[c], expected[c], 1e-15);
}

TEST(Guidance, WeightsOnSimplexAndConvexCombination) {
    Rng rng(6);
    const PrototypeBank bank = make_bank(20, 24, rng);
    for (std::size_t k : {1u, 3u, 7u, 20u}) {
        for (int trial = 0; trial < 50; ++trial) {
            const Vec e = gaussian_vector(24, 1.0, rng);
            const GuidanceResult r = multi_prototype_guidance(e, bank, config(k, 2));
            ASSERT_EQ(r.indices.size(), k);
            double s = 0;
            for (double w : r.weights) {
                EXPECT_GE(w, 0.0);
                s += w;
            }
            EXPECT_NEAR(s, 1.0, 1e-9);
            for (std::size_t c = 0; c < 24; ++c) {
                double combo = 0;
                for (std::size_t i = 0; i < k; ++i) combo += r.weights[i] * bank.prototypes(r.indices[i], c);
                EXPECT_NEAR(r.p_emo[c], combo, 1e-14);
            }
            for (std::size_t i = 0; i + 1 < k; ++i) EXPECT_GE(r.similarities[i], r.similarities[i + 1]);
        }
    }
}

TEST(Guidance, SelectionInvariantUnderRescaling) {
    Rng rng(7);
    const PrototypeBank bank = make_bank(16, 16, rng);
    for (int trial = 0; trial < 100; ++trial) {
        Vec e = gaussian_vector(16, 1.0, rng);
        const GuidanceResult base = multi_prototype_guidance(e, bank, config(4, 0));
        const double scale = 0.01 + 20.0 * rng.uniform();
        for (double& x : e) x *= scale;
        EXPECT_EQ(multi_prototype_guidance(e, bank, config(4, 0)).indices, base.indices);
    }
}

TEST(Guidance, Errors) {
    const PrototypeBank bank = orthonormal_bank(3, 3);
    const std::pair<Vec, GuidanceConfig> cases[] = {{Vec{0, 0, 0}, config(1, 0)}, {Vec{1, 0, 0}, config(4, 0)},
                                                    {Vec{1, 0}, config(1, 0)}};
    const ErrorCode expected[] = {ErrorCode::ZeroVector, ErrorCode::KTooLarge, ErrorCode::DimMismatch};
    for (int i = 0; i < 3; ++i) {
        try {
            multi_prototype_guidance(cases[i].first, bank, cases[i].second);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), expected[i]);
        }
    }
}

TEST(Blend, WeightSchedule) {
    const BlendSchedule s{50, 0.2, 0.6};
    std::size_t zeros = 0;
    double prev = -1.0;
    for (std::size_t t = 0; t < 50; ++t) {
        const double w = blend_weight(t, s);
        EXPECT_GE(w, prev);
        prev = w;
        if (w == 0.0) ++zeros;
    }
    // rho = t / 49 < 0.2 for t <= 9; t = 10 sits just past the ramp start.
    EXPECT_EQ(zeros, 10u);
    EXPECT_EQ(blend_weight(49, s), 1.0);
    EXPECT_EQ(blend_weight(0, BlendSchedule{1, 0.2, 0.6}), 1.0);
    const BlendSchedule step{11, 0.5, 0.5};
    EXPECT_EQ(blend_weight(4, step), 0.0);
    EXPECT_EQ(blend_weight(6, step), 1.0);
}

TEST(Blend, EndpointsExactAndMidpoint) {
    const BlendSchedule s{50, 0.2, 0.6};
    const Vec c{3.0, 4.0, 0.0}, e{0.0, 0.0, 2.0};
    EXPECT_EQ(blend(0, s, c, e), normalized(c));
    EXPECT_EQ(blend(49, s, c, e), normalized(e));

    const BlendSchedule mid{3, 0.0, 1.0};
    const Vec p = blend(1, mid, Vec{1, 0}, Vec{0, 1});
    EXPECT_NEAR(p[0], 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(p[1], 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Blend, UnitNormAndMonotoneCosine) {
    Rng rng(8);
    const BlendSchedule s{50, 0.2, 0.6};
    const Mat basis = orthogonal_init(2, 12, rng);
    const Vec c(basis.row(0).begin(), basis.row(0).end());
    const Vec e(basis.row(1).begin(), basis.row(1).end());
    double prev = -2.0;
    for (std::size_t t = 0; t < 50; ++t) {
        const Vec p = blend(t, s, c, e);
        EXPECT_NEAR(norm(p), 1.0, 1e-9);
        const double cs = cosine_sim(p, e);
        EXPECT_GE(cs, prev);
        prev = cs;
    }
}

TEST(Blend, Errors) {
    const BlendSchedule mid{3, 0.0, 1.0};
    try {
        blend(1, mid, Vec{1, 0}, Vec{-1, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateBlend);
    }
    try {
        blend(1, mid, Vec{0, 0}, Vec{1, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
    }
}

TEST(Reweight, ZeroProjectionIsIdentity) {
    Rng rng(9);
    GuidanceConfig cfg;
    cfg.Wp = Mat(3, 6, 0.0);
    const Tensor4 a = attention_fixture(2, 3, 4, 5, 4, rng);
    const Tensor4 out = reweight_attention(a, gaussian_vector(6, 1.0, rng), cfg);
    for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(out.data[i], a.data[i], 1e-12);
}

TEST(Reweight, RowSumsFollowHeadFactors) {
    Rng rng(10);
    GuidanceConfig cfg = make_guidance_config(4, 6, rng);
    for (double& x : cfg.Wp.data()) x *= 40.0;  // push some factors below zero
    const Tensor4 a = attention_fixture(2, 4, 3, 5, 4, rng);
    const Vec p = normalized(gaussian_vector(6, 1.0, rng));
    const Tensor4 out = reweight_attention(a, p, cfg);
    const Vec b = mat_vec(cfg.Wp, p);
    for (std::size_t x = 0; x < 2; ++x)
        for (std::size_t h = 0; h < 4; ++h)
            for (std::size_t q = 0; q < 3; ++q) {
                double s = 0;
                for (double w : out.row(x, h, q)) s += w;
                EXPECT_NEAR(s, 1.0 + 1.5 * std::tanh(b[h]), 1e-9);
            }
}

TEST(Reweight, HandCaseRenormalization) {
    GuidanceConfig cfg;
    cfg.Wp = Mat(2, 2, 0.0);
    cfg.Wp(0, 0) = 1.0;
    const Vec p{1.0, 0.0};
    const Vec f = head_factors(p, cfg);
    EXPECT_NEAR(f[0], 2.14239, 1e-5);
    EXPECT_EQ(f[1], 1.0);
    Tensor4 a(1, 2, 1, 2, 0.5);
    const Tensor4 plain = reweight_attention(a, p, cfg);
    EXPECT_NEAR(plain.at(0, 0, 0, 0), 1.07119, 1e-5);
    cfg.renormalize_rows = true;
    const Tensor4 renorm = reweight_attention(a, p, cfg);
    for (double w : renorm.data) EXPECT_NEAR(w, 0.5, 1e-12);
}

TEST(Reweight, RenormalizedRowsCancelUniformFactor) {
    Rng rng(11);
    GuidanceConfig cfg = make_guidance_config(3, 5, rng);
    cfg.renormalize_rows = true;
    const Tensor4 a = attention_fixture(2, 3, 4, 6, 3, rng);
    const Tensor4 out = reweight_attention(a, normalized(gaussian_vector(5, 1.0, rng)), cfg);
    for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(out.data[i], a.data[i], 1e-12);
}

TEST(Reweight, NonPositiveRowRejectedWhenRenormalizing) {
    GuidanceConfig cfg;
    cfg.Wp = Mat(1, 1, -100.0);
    cfg.renormalize_rows = true;
    try {
        reweight_attention(Tensor4(1, 1, 1, 2, 0.5), Vec{1.0}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonPositiveRow);
    }
    cfg.Wp = Mat(2, 1, 0.0);
    try {
        reweight_attention(Tensor4(1, 1, 1, 2, 0.5), Vec{1.0}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(Trace, SingleStepAndDeterminism) {
    Rng rng(12);
    const PrototypeBank bank = make_bank(6, 8, rng);
    const GuidanceConfig cfg = make_guidance_config(2, 8, rng);
    const Tensor4 fixture = attention_fixture(1, 2, 3, 4, 4, rng);
    const Vec content = gaussian_vector(8, 1.0, rng), query = gaussian_vector(8, 1.0, rng);
    const GuidanceTrace one = guidance_trace(content, query, bank, cfg, BlendSchedule{1, 0.2, 0.6}, fixture);
    ASSERT_EQ(one.steps.size(), 1u);
    EXPECT_EQ(one.steps[0].blend_weight, 1.0);

    const GuidanceTrace a = guidance_trace(content, query, bank, cfg, BlendSchedule{}, fixture);
    const GuidanceTrace b = guidance_trace(content, query, bank, cfg, BlendSchedule{}, fixture);
    ASSERT_EQ(a.steps.size(), 50u);
    for (std::size_t t = 0; t < 50; ++t) EXPECT_EQ(to_json(a.steps[t]).dump(), to_json(b.steps[t]).dump());
    std::size_t zeros = 0;
    for (const TraceStep& s : a.steps) zeros += s.blend_weight == 0.0;
    EXPECT_EQ(zeros, 10u);
}

TEST(Trace, CosineToEmotionNondecreasingForOrthonormalEndpoints) {
    const PrototypeBank bank = orthonormal_bank(4, 6);
    GuidanceConfig cfg;
    cfg.k_pos = 1;
    cfg.k_neg = 0;
    cfg.Wp = Mat(2, 6, 0.01);
    Rng rng(13);
    const Tensor4 fixture = attention_fixture(1, 2, 2, 3, 2, rng);
    const GuidanceTrace trace =
        guidance_trace(Vec{0, 0, 0, 0, 1, 0}, Vec{1, 0.1, 0, 0, 0, 0}, bank, cfg, BlendSchedule{}, fixture);
    double prev = -2.0;
    for (const TraceStep& s : trace.steps) {
        EXPECT_GE(s.cos_to_emo, prev - 1e-15);
        prev = s.cos_to_emo;
        EXPECT_EQ(s.row_sums.size(), 4u);
    }
    EXPECT_NEAR(trace.steps.back().cos_to_emo, 1.0, 1e-15);
}
