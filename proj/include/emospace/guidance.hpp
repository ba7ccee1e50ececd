#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "emospace/core.hpp"
#include "emospace/prototype_bank.hpp"

namespace emospace {

// Dense (batch, heads, rows, cols) tensor, row-major.
struct Tensor4 {
    std::size_t batch = 0;
    std::size_t heads = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(std::size_t b, std::size_t h, std::size_t r, std::size_t c, double fill = 0.0)
        : batch(b), heads(h), rows(r), cols(c), data(b * h * r * c, fill) {}

    std::size_t offset(std::size_t b, std::size_t h, std::size_t r) const { return ((b * heads + h) * rows + r) * cols; }
    double& at(std::size_t b, std::size_t h, std::size_t r, std::size_t c) { return data[offset(b, h, r) + c]; }
    double at(std::size_t b, std::size_t h, std::size_t r, std::size_t c) const { return data[offset(b, h, r) + c]; }
    std::span<double> row(std::size_t b, std::size_t h, std::size_t r) { return {data.data() + offset(b, h, r), cols}; }
    std::span<const double> row(std::size_t b, std::size_t h, std::size_t r) const {
        return {data.data() + offset(b, h, r), cols};
    }

    bool operator==(const Tensor4&) const = default;
};

struct AttentionInputs {
    Tensor4 query;  // (B, H, T_q, d_k)
    Tensor4 key;    // (B, H, T_k, d_k)
    Tensor4 value;  // (B, H, T_k, d_v)
};

struct AttentionResult {
    Tensor4 output;   // (B, H, T_q, d_v)
    Tensor4 weights;  // (B, H, T_q, T_k)
};

// softmax(Q K^T / sqrt(d_k)) V over the key axis. Throws ShapeMismatch.
AttentionResult attention(const AttentionInputs& inputs);

inline constexpr double kDefaultGuidanceTemperature = 0.1;
inline constexpr double kDefaultInjectionStrength = 1.5;

struct GuidanceConfig {
    std::size_t k_pos = 4;
    std::size_t k_neg = 4;
    double tau_temp = kDefaultGuidanceTemperature;
    double alpha_attn = kDefaultInjectionStrength;
    Mat Wp;  // heads x d_p
    bool renormalize_rows = false;
    double neg_scale = 0.3;

    void validate() const;
    bool operator==(const GuidanceConfig&) const = default;
};

// Default config with Wp ~ N(0, 0.02^2).
GuidanceConfig make_guidance_config(std::size_t heads, std::size_t dim, Rng& rng);

struct GuidanceResult {
    Vec p_emo;
    std::vector<std::size_t> indices;  // top-k, by descending similarity
    Vec weights;
    Vec similarities;                  // s_i for the selected indices
    std::optional<Vec> p_neg;
    std::vector<std::size_t> neg_indices;
    Vec neg_weights;
};

// Top-k positive (and optional bottom-k negative) prototype combination with
// s_i = <e, p_i> and temperature softmax weights.
GuidanceResult multi_prototype_guidance(std::span<const double> query, const PrototypeBank& bank,
                                        const GuidanceConfig& cfg);

// normalize(p_emo - neg_scale * p_neg), or normalize(p_emo) without negatives.
Vec effective_guidance(const GuidanceResult& result, double neg_scale);

nlohmann::json to_json(const GuidanceResult& result);

struct BlendSchedule {
    std::size_t total_steps = 50;
    double ramp_start = 0.2;
    double ramp_end = 0.6;

    void validate() const;
};

// Phase weight w(rho) with rho = step / (T - 1): 0 before the ramp, linear on
// [ramp_start, ramp_end], 1 after.
double blend_weight(std::size_t step, const BlendSchedule& schedule);

// normalize((1 - w) p_content^ + w p_emo^). Throws DegenerateBlend when the
// combination cancels.
Vec blend(std::size_t step, const BlendSchedule& schedule, std::span<const double> p_content,
          std::span<const double> p_emo);

// 1 + alpha_attn * tanh(Wp p_t), one factor per head.
Vec head_factors(std::span<const double> p_t, const GuidanceConfig& cfg);

// Scales every (b, h, q) row by factor_h; with renormalize_rows, each row is
// then divided by its sum (rows with factor <= 0 raise NonPositiveRow).
Tensor4 reweight_attention(const Tensor4& weights, std::span<const double> p_t, const GuidanceConfig& cfg);

struct TraceStep {
    std::size_t step = 0;
    double blend_weight = 0.0;
    Vec head_factors;
    double cos_to_emo = 0.0;     // cos(p(t), p_emo)
    double cos_to_target = 0.0;  // cos(p(t), effective guidance)
    Vec row_sums;                // reweighted row sums, one per (b, h, q)
};

struct GuidanceTrace {
    GuidanceResult guidance;
    Vec target;
    std::vector<TraceStep> steps;
};

nlohmann::json to_json(const TraceStep& step);

// Deterministic attention weights for traces: random Q, K, V through attention().
Tensor4 attention_fixture(std::size_t batch, std::size_t heads, std::size_t queries, std::size_t keys,
                          std::size_t key_dim, Rng& rng);

// Blends from p_content toward the effective guidance of `query` at every
// step and reweights the fixture with the blended vector.
GuidanceTrace guidance_trace(std::span<const double> p_content, std::span<const double> query,
                             const PrototypeBank& bank, const GuidanceConfig& cfg, const BlendSchedule& schedule,
                             const Tensor4& fixture);

}  // namespace emospace
