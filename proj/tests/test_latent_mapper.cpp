#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "emospace/latent_mapper.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace emospace;

namespace {

oracle::LVec mapper_oracle(const Vec& x, const Mapper& m) {
    oracle::LVec hidden(m.hidden_dim());
    for (std::size_t j = 0; j < m.hidden_dim(); ++j) {
        long double s = m.b1[j];
        for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<long double>(m.W1(j, i)) * x[i];
        hidden[j] = oracle::gelu(s);
    }
    oracle::LVec y(m.output_dim());
    for (std::size_t o = 0; o < m.output_dim(); ++o) {
        y[o] = m.b2[o];
        for (std::size_t j = 0; j < m.hidden_dim(); ++j) y[o] += static_cast<long double>(m.W2(o, j)) * hidden[j];
    }
    return y;
}

}  // namespace

TEST(Mapper, ZeroParametersGiveZero) {
    Rng rng(1);
    Mapper m = make_mapper({3, 4, 2}, rng);
    for (double& x : m.W1.data()) x = 0.0;
    for (double& x : m.W2.data()) x = 0.0;
    m.b1.assign(m.b1.size(), 0.0);
    m.b2.assign(m.b2.size(), 0.0);
    EXPECT_EQ(map_embedding(Vec{1.0, -2.0, 3.0}, m), Vec(2, 0.0));
}

TEST(Mapper, MatchesStraightLineOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Mapper m = make_mapper({3, 2, 2}, rng);
        const Vec x = gaussian_vector(3, 1.0, rng);
        const Vec y = map_embedding(x, m);
        const oracle::LVec ref = mapper_oracle(x, m);
        for (std::size_t o = 0; o < 2; ++o) EXPECT_NEAR(y[o], static_cast<double>(ref[o]), 1e-12);
    }
}

TEST(Mapper, IdentityLikeIsMonotoneOnPositiveOrthant) {
    Mapper m;
    m.W1 = Mat(3, 3);
    m.W2 = Mat(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        m.W1(i, i) = 5.0;
        m.W2(i, i) = 1.0;
    }
    m.b1.assign(3, 0.0);
    m.b2.assign(3, 0.0);
    Vec x{0.1, 0.2, 0.3};
    Vec prev = map_embedding(x, m);
    for (int step = 0; step < 50; ++step) {
        for (double& v : x) v += 0.05;
        const Vec y = map_embedding(x, m);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_GT(y[i], prev[i]);
        prev = y;
    }
}

TEST(Mapper, DimMismatch) {
    Rng rng(3);
    const Mapper m = make_mapper({3, 3, 2}, rng);
    try {
        map_embedding(Vec{1.0, 2.0}, m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
    }
}

TEST(MapperLoss, KnownValues) {
    const Vec t{0.6, 0.8};
    EXPECT_NEAR(mapper_loss(t, t, {}), 0.0, 1e-15);
    EXPECT_NEAR(mapper_loss(Vec{1.2, 1.6}, t, {1.0, 0.0}), 0.0, 1e-15);
    EXPECT_NEAR(mapper_loss(Vec{-0.6, -0.8}, t, {1.0, 1.0}), 6.0, 1e-12);
    EXPECT_NEAR(mapper_loss(Vec{0.0, 0.0}, t, {1.0, 0.0}), 1.0, 1e-15);
}

TEST(MapperLoss, NonnegativeAndZeroOnlyAtTarget) {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec t = gaussian_vector(5, 1.0, rng);
        const Vec p = gaussian_vector(5, 1.0, rng);
        EXPECT_GT(mapper_loss(p, t, {}), 0.0);
    }
}

TEST(MapperGradients, MatchCentralDifferences) {
    Rng rng(5);
    const fixtures::LinearPairs pairs = fixtures::linear_pairs(6, 4, 3, 0.1, 6);
    Mapper m = make_mapper({4, 4, 3}, rng);
    std::vector<std::size_t> rows(6);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const MapperLossWeights w;
    MapperGradients g;
    mapper_loss_and_gradients(pairs.inputs, pairs.targets, rows, m, w, &g);

    double worst = 0.0;
    auto check = [&](std::vector<double>& values, const std::vector<double>& grads) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double theta = values[i];
            const double h = 1e-5 * std::max(1.0, std::abs(theta));
            values[i] = theta + h;
            const double up = mapper_loss_and_gradients(pairs.inputs, pairs.targets, rows, m, w, nullptr);
            values[i] = theta - h;
            const double down = mapper_loss_and_gradients(pairs.inputs, pairs.targets, rows, m, w, nullptr);
            values[i] = theta;
            const double numeric = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(numeric - grads[i]) /
                                        std::max({std::abs(numeric), std::abs(grads[i]), fixtures::kRelativeFloor}));
        }
    };
    check(m.W1.data(), g.W1.data());
    check(m.b1, g.b1);
    check(m.W2.data(), g.W2.data());
    check(m.b2, g.b2);
    EXPECT_LT(worst, 1e-4);
}

TEST(TrainMapper, ZeroLearningRateKeepsInitialization) {
    const fixtures::LinearPairs pairs = fixtures::linear_pairs(20, 4, 3, 0.0, 7);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 0.0;
    cfg.seed = 99;
    const MapperTrainResult r = train_mapper(pairs.inputs, pairs.targets, cfg, {});
    Rng rng(99);
    EXPECT_EQ(r.mapper, make_mapper({4, 4, 3}, rng));
}

TEST(TrainMapper, DeterministicAndImproves) {
    const fixtures::LinearPairs pairs = fixtures::linear_pairs(200, 8, 6, 0.01, 8);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.learning_rate = 1e-2;
    cfg.seed = 3;
    const MapperTrainResult a = train_mapper(pairs.inputs, pairs.targets, cfg, {});
    const MapperTrainResult b = train_mapper(pairs.inputs, pairs.targets, cfg, {});
    EXPECT_EQ(a.mapper, b.mapper);
    EXPECT_EQ(a.report.epoch_loss, b.report.epoch_loss);
    EXPECT_LT(a.report.epoch_loss.back(), a.report.epoch_loss.front());
    EXPECT_GT(mean_cosine(pairs.inputs, pairs.targets, a.mapper), 0.9);
}

TEST(TrainMapper, EmptyInput) {
    TrainConfig cfg;
    try {
        train_mapper(Mat(0, 4), Mat(0, 3), cfg, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
    }
}
