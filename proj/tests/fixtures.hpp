#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "emospace/training.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace emospace;

// Small problem with two nearly coincident prototypes so every loss term and
// every gradient block is active.
struct Micro {
    FusionNet net;
    PrototypeBank bank;
    Batch batch;
    TrainConfig cfg;
    LossWeights weights;
};

inline Micro micro(std::uint64_t seed, std::size_t d = 8, std::size_t k = 4, std::size_t m = 3, std::size_t n = 4) {
    Rng rng(seed);
    Micro out;
    out.net = make_fusion_net(FusionConfig{d, d, 6, 5, m}, rng);
    out.bank = make_bank(k, d, rng);
    if (k >= 2) {
        Vec close(out.bank.prototypes.row(0).begin(), out.bank.prototypes.row(0).end());
        const Vec noise = gaussian_vector(d, 0.15, rng);
        for (std::size_t i = 0; i < d; ++i) close[i] += noise[i];
        normalize_in_place(close);
        std::copy(close.begin(), close.end(), out.bank.prototypes.row(1).begin());
    }
    out.batch.visual = Mat(n, d);
    out.batch.textual = Mat(n, d);
    for (std::size_t s = 0; s < n; ++s) {
        const Vec v = normalized(gaussian_vector(d, 1.0, rng));
        const Vec t = normalized(gaussian_vector(d, 1.0, rng));
        std::copy(v.begin(), v.end(), out.batch.visual.row(s).begin());
        std::copy(t.begin(), t.end(), out.batch.textual.row(s).begin());
        out.batch.labels.push_back(s % m);
    }
    return out;
}

inline oracle::Model widen(const FusionNet& net, const PrototypeBank& bank) {
    return {oracle::widen(net.W1), oracle::widen(net.W2), oracle::widen(net.Ug), oracle::widen_vec(net.wg),
            oracle::widen(bank.prototypes)};
}

inline oracle::Weights widen(const LossWeights& w, const TrainConfig& cfg) {
    return {w.alpha, w.beta, w.gamma, w.delta, cfg.contrast_temperature, cfg.distance_margin};
}

// Every scalar parameter paired with its analytic gradient entry.
struct ParamRef {
    const char* block;
    double* value;
    double grad;
};

inline std::vector<ParamRef> parameters(FusionNet& net, PrototypeBank& bank, const Gradients& g) {
    std::vector<ParamRef> out;
    auto add = [&](const char* name, std::vector<double>& values, const std::vector<double>& grads) {
        for (std::size_t i = 0; i < values.size(); ++i) out.push_back({name, &values[i], grads[i]});
    };
    add("W1", net.W1.data(), g.W1.data());
    add("W2", net.W2.data(), g.W2.data());
    add("Ug", net.Ug.data(), g.Ug.data());
    add("wg", net.wg, g.wg);
    add("prototypes", bank.prototypes.data(), g.prototypes.data());
    return out;
}

// Relative error with an absolute floor that keeps gradients of ~0 from
// dividing noise by noise.
inline constexpr double kRelativeFloor = 1e-6;

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t parameters = 0;
    const char* worst_block = "";
};

// Central differences of the assignment-fixed composite loss, step
// h = 1e-5 * max(1, |theta|).
inline GradientCheck check_gradients(Micro m) {
    const LossAndGradients lg = gradients(m.batch, m.net, m.bank, m.weights, m.cfg);
    const std::vector<std::size_t> assigned = lg.assignments;
    GradientCheck out;
    for (ParamRef& p : parameters(m.net, m.bank, lg.grads)) {
        const double theta = *p.value;
        const double h = 1e-5 * std::max(1.0, std::abs(theta));
        *p.value = theta + h;
        const double up = composite_loss(m.batch, m.net, m.bank, m.weights, m.cfg, assigned).total;
        *p.value = theta - h;
        const double down = composite_loss(m.batch, m.net, m.bank, m.weights, m.cfg, assigned).total;
        *p.value = theta;
        const double numeric = (up - down) / (2.0 * h);
        const double rel =
            std::abs(numeric - p.grad) / std::max({std::abs(numeric), std::abs(p.grad), kRelativeFloor});
        if (rel > out.max_relative_error) {
            out.max_relative_error = rel;
            out.worst_block = p.block;
        }
        ++out.parameters;
    }
    return out;
}

}  // namespace fixtures

#include "emospace/latent_mapper.hpp"

namespace fixtures {

// Pairs (x, Q x + noise) with x ~ N(0, I) and Q a random orthogonal map.
struct LinearPairs {
    emospace::Mat inputs;
    emospace::Mat targets;
};

inline LinearPairs linear_pairs(std::size_t count, std::size_t in, std::size_t out, double noise, std::uint64_t seed) {
    using namespace emospace;
    Rng rng(seed);
    const Mat q = orthogonal_init(out, in, rng);
    LinearPairs p{Mat(count, in), Mat(count, out)};
    for (std::size_t r = 0; r < count; ++r) {
        const Vec x = gaussian_vector(in, 1.0, rng);
        const Vec y = mat_vec(q, x);
        for (std::size_t c = 0; c < in; ++c) p.inputs(r, c) = x[c];
        for (std::size_t c = 0; c < out; ++c) p.targets(r, c) = y[c] + noise * rng.normal();
    }
    return p;
}

inline emospace::Mat take_rows(const emospace::Mat& m, std::size_t begin, std::size_t end) {
    emospace::Mat out(0, m.cols());
    for (std::size_t r = begin; r < end; ++r) out.append_row(m.row(r));
    return out;
}

}  // namespace fixtures

#include <cstring>
#include <string>

#include "emospace/data_io.hpp"

namespace fixtures {

// Scales the first stored prototype coordinate so the row leaves the unit sphere.
inline std::string corrupt_prototype_row(std::string bytes, const emospace::Checkpoint& ckpt) {
    std::uint32_t len = 0;
    for (int i = 3; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(bytes[8 + i]);
    const std::size_t before = ckpt.net.W1.size() + ckpt.net.W2.size() + ckpt.net.Ug.size() + ckpt.net.wg.size();
    const std::size_t at = 12 + len + before * 4;
    float x;
    std::memcpy(&x, bytes.data() + at, 4);
    x = x * 1.5f + 0.1f;
    std::memcpy(bytes.data() + at, &x, 4);
    return bytes;
}

}  // namespace fixtures
