#include "emospace/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace emospace {

namespace {

std::string shape_string(const Tensor4& t) {
    return "(" + std::to_string(t.batch) + "," + std::to_string(t.heads) + "," + std::to_string(t.rows) + "," +
           std::to_string(t.cols) + ")";
}

}  // namespace

AttentionResult attention(const AttentionInputs& in) {
    const Tensor4& q = in.query;
    const Tensor4& k = in.key;
    const Tensor4& v = in.value;
    if (q.cols == 0 || q.rows == 0 || k.rows == 0 || q.batch == 0 || q.heads == 0) {
        fail(ErrorCode::ShapeMismatch, "attention inputs must be non-empty");
    }
    if (k.batch != q.batch || k.heads != q.heads || k.cols != q.cols || v.batch != q.batch || v.heads != q.heads ||
        v.rows != k.rows || q.data.size() != q.batch * q.heads * q.rows * q.cols ||
        k.data.size() != k.batch * k.heads * k.rows * k.cols || v.data.size() != v.batch * v.heads * v.rows * v.cols) {
        fail(ErrorCode::ShapeMismatch,
             "attention shapes Q" + shape_string(q) + " K" + shape_string(k) + " V" + shape_string(v) + " disagree");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
    AttentionResult out{Tensor4(q.batch, q.heads, q.rows, v.cols), Tensor4(q.batch, q.heads, q.rows, k.rows)};
    Vec logits(k.rows);
    for (std::size_t b = 0; b < q.batch; ++b) {
        for (std::size_t h = 0; h < q.heads; ++h) {
            for (std::size_t i = 0; i < q.rows; ++i) {
                auto qi = q.row(b, h, i);
                for (std::size_t j = 0; j < k.rows; ++j) logits[j] = dot(qi, k.row(b, h, j)) * scale;
                const Vec w = softmax(logits, 1.0);
                std::copy(w.begin(), w.end(), out.weights.row(b, h, i).begin());
                auto o = out.output.row(b, h, i);
                for (std::size_t j = 0; j < k.rows; ++j) {
                    auto vj = v.row(b, h, j);
                    for (std::size_t c = 0; c < v.cols; ++c) o[c] += w[j] * vj[c];
                }
            }
        }
    }
    return out;
}

void GuidanceConfig::validate() const {
    if (k_pos == 0) fail(ErrorCode::ConfigError, "k_pos must be at least 1");
    if (!(tau_temp > 0.0)) fail(ErrorCode::InvalidTemperature, "tau_temp must be > 0");
    if (!std::isfinite(alpha_attn) || !std::isfinite(neg_scale)) {
        fail(ErrorCode::ConfigError, "alpha_attn and neg_scale must be finite");
    }
    require_finite(Wp.data(), "Wp");
}

GuidanceConfig make_guidance_config(std::size_t heads, std::size_t dim, Rng& rng) {
    GuidanceConfig cfg;
    cfg.Wp = gaussian_matrix(heads, dim, 0.02, rng);
    return cfg;
}

namespace {

// Indices ordered by the comparator on similarity, ties to the lower index.
std::vector<std::size_t> ranked(const Vec& sims, bool descending) {
    std::vector<std::size_t> idx(sims.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return descending ? sims[a] > sims[b] : sims[a] < sims[b];
    });
    return idx;
}

Vec combine(const PrototypeBank& bank, const std::vector<std::size_t>& idx, const Vec& weights) {
    Vec out(bank.dim(), 0.0);
    for (std::size_t n = 0; n < idx.size(); ++n) {
        auto p = bank.prototypes.row(idx[n]);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += weights[n] * p[c];
    }
    return out;
}

}  // namespace

GuidanceResult multi_prototype_guidance(std::span<const double> query, const PrototypeBank& bank,
                                        const GuidanceConfig& cfg) {
    cfg.validate();
    if (query.size() != bank.dim()) {
        fail(ErrorCode::DimMismatch, "query has dimension " + std::to_string(query.size()) + ", bank expects " +
                                         std::to_string(bank.dim()));
    }
    if (!(norm(query) > 0.0)) fail(ErrorCode::ZeroVector, "guidance query has zero norm");
    if (cfg.k_pos > bank.size() || cfg.k_neg > bank.size()) {
        fail(ErrorCode::KTooLarge, "k_pos=" + std::to_string(cfg.k_pos) + ", k_neg=" + std::to_string(cfg.k_neg) +
                                       " exceed K=" + std::to_string(bank.size()));
    }
    Vec sims(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) sims[i] = dot(query, bank.prototypes.row(i));

    GuidanceResult out;
    const auto top = ranked(sims, true);
    out.indices.assign(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(cfg.k_pos));
    for (std::size_t i : out.indices) out.similarities.push_back(sims[i]);
    out.weights = softmax(out.similarities, cfg.tau_temp);
    out.p_emo = combine(bank, out.indices, out.weights);

    if (cfg.k_neg > 0) {
        const auto bottom = ranked(sims, false);
        out.neg_indices.assign(bottom.begin(), bottom.begin() + static_cast<std::ptrdiff_t>(cfg.k_neg));
        Vec negated;
        for (std::size_t i : out.neg_indices) negated.push_back(-sims[i]);
        out.neg_weights = softmax(negated, cfg.tau_temp);
        out.p_neg = combine(bank, out.neg_indices, out.neg_weights);
    }
    return out;
}

Vec effective_guidance(const GuidanceResult& result, double neg_scale) {
    Vec out = result.p_emo;
    if (result.p_neg) {
        for (std::size_t c = 0; c < out.size(); ++c) out[c] -= neg_scale * (*result.p_neg)[c];
    }
    if (!(norm(out) > 1e-12)) fail(ErrorCode::DegenerateBlend, "positive and negative guidance cancel");
    normalize_in_place(out);
    return out;
}

nlohmann::json to_json(const GuidanceResult& r) {
    nlohmann::json out = {{"p_emo", r.p_emo},
                          {"indices", r.indices},
                          {"weights", r.weights},
                          {"similarities", r.similarities},
                          {"weight_sum", std::accumulate(r.weights.begin(), r.weights.end(), 0.0)}};
    if (r.p_neg) {
        out["p_neg"] = *r.p_neg;
        out["neg_indices"] = r.neg_indices;
        out["neg_weights"] = r.neg_weights;
    }
    return out;
}

void BlendSchedule::validate() const {
    if (total_steps == 0) fail(ErrorCode::ConfigError, "total_steps must be at least 1");
    if (!(ramp_start >= 0.0 && ramp_start <= 1.0 && ramp_end >= 0.0 && ramp_end <= 1.0 && ramp_start <= ramp_end)) {
        fail(ErrorCode::ConfigError, "blend ramp needs 0 <= ramp_start <= ramp_end <= 1");
    }
}

double blend_weight(std::size_t step, const BlendSchedule& schedule) {
    schedule.validate();
    if (step >= schedule.total_steps) {
        fail(ErrorCode::IndexOutOfRange,
             "step " + std::to_string(step) + " outside a " + std::to_string(schedule.total_steps) + "-step schedule");
    }
    const double rho = schedule.total_steps == 1
                           ? 1.0
                           : static_cast<double>(step) / static_cast<double>(schedule.total_steps - 1);
    if (rho < schedule.ramp_start) return 0.0;
    if (rho > schedule.ramp_end) return 1.0;
    if (schedule.ramp_end == schedule.ramp_start) return 1.0;
    return (rho - schedule.ramp_start) / (schedule.ramp_end - schedule.ramp_start);
}

Vec blend(std::size_t step, const BlendSchedule& schedule, std::span<const double> p_content,
          std::span<const double> p_emo) {
    if (p_content.size() != p_emo.size()) fail(ErrorCode::DimMismatch, "blend endpoints differ in dimension");
    if (!(norm(p_content) > 0.0) || !(norm(p_emo) > 0.0)) fail(ErrorCode::ZeroVector, "blend endpoint has zero norm");
    const double w = blend_weight(step, schedule);
    Vec content = normalized(p_content);
    Vec emo = normalized(p_emo);
    if (w == 0.0) return content;
    if (w == 1.0) return emo;
    Vec out(content.size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1.0 - w) * content[c] + w * emo[c];
    const double n = norm(out);
    if (n < 1e-9) fail(ErrorCode::DegenerateBlend, "content and emotion vectors cancel at step " + std::to_string(step));
    for (double& x : out) x /= n;
    return out;
}

Vec head_factors(std::span<const double> p_t, const GuidanceConfig& cfg) {
    Vec bias = mat_vec(cfg.Wp, p_t);
    for (double& b : bias) b = 1.0 + cfg.alpha_attn * std::tanh(b);
    return bias;
}

Tensor4 reweight_attention(const Tensor4& weights, std::span<const double> p_t, const GuidanceConfig& cfg) {
    if (cfg.Wp.rows() != weights.heads) {
        fail(ErrorCode::ShapeMismatch, "Wp has " + std::to_string(cfg.Wp.rows()) + " rows for " +
                                           std::to_string(weights.heads) + " heads");
    }
    if (cfg.Wp.cols() != p_t.size()) {
        fail(ErrorCode::ShapeMismatch, "Wp has " + std::to_string(cfg.Wp.cols()) + " columns for a " +
                                           std::to_string(p_t.size()) + "-dim guidance vector");
    }
    if (weights.data.size() != weights.batch * weights.heads * weights.rows * weights.cols) {
        fail(ErrorCode::ShapeMismatch, "attention tensor storage does not match its shape");
    }
    const Vec factors = head_factors(p_t, cfg);
    Tensor4 out = weights;
    for (std::size_t b = 0; b < out.batch; ++b) {
        for (std::size_t h = 0; h < out.heads; ++h) {
            for (std::size_t q = 0; q < out.rows; ++q) {
                auto row = out.row(b, h, q);
                for (double& x : row) x *= factors[h];
                if (!cfg.renormalize_rows) continue;
                const double sum = std::accumulate(row.begin(), row.end(), 0.0);
                if (!(factors[h] > 0.0) || !(sum > 0.0)) {
                    fail(ErrorCode::NonPositiveRow, "head " + std::to_string(h) + " has factor " +
                                                        std::to_string(factors[h]) + "; cannot renormalize");
                }
                for (double& x : row) x /= sum;
            }
        }
    }
    return out;
}

nlohmann::json to_json(const TraceStep& s) {
    return {{"step", s.step},
            {"blend_weight", s.blend_weight},
            {"head_factors", s.head_factors},
            {"cos_to_emo", s.cos_to_emo},
            {"cos_to_target", s.cos_to_target},
            {"row_sums", s.row_sums}};
}

Tensor4 attention_fixture(std::size_t batch, std::size_t heads, std::size_t queries, std::size_t keys,
                          std::size_t key_dim, Rng& rng) {
    AttentionInputs in{Tensor4(batch, heads, queries, key_dim), Tensor4(batch, heads, keys, key_dim),
                       Tensor4(batch, heads, keys, key_dim)};
    for (Tensor4* t : {&in.query, &in.key, &in.value})
        for (double& x : t->data) x = rng.normal();
    return attention(in).weights;
}

GuidanceTrace guidance_trace(std::span<const double> p_content, std::span<const double> query,
                             const PrototypeBank& bank, const GuidanceConfig& cfg, const BlendSchedule& schedule,
                             const Tensor4& fixture) {
    schedule.validate();
    GuidanceTrace trace;
    trace.guidance = multi_prototype_guidance(query, bank, cfg);
    trace.target = effective_guidance(trace.guidance, cfg.neg_scale);
    for (std::size_t step = 0; step < schedule.total_steps; ++step) {
        TraceStep s;
        s.step = step;
        s.blend_weight = blend_weight(step, schedule);
        const Vec p_t = blend(step, schedule, p_content, trace.target);
        s.head_factors = head_factors(p_t, cfg);
        s.cos_to_emo = cosine_sim(p_t, trace.guidance.p_emo);
        s.cos_to_target = cosine_sim(p_t, trace.target);
        const Tensor4 reweighted = reweight_attention(fixture, p_t, cfg);
        for (std::size_t b = 0; b < reweighted.batch; ++b)
            for (std::size_t h = 0; h < reweighted.heads; ++h)
                for (std::size_t q = 0; q < reweighted.rows; ++q) {
                    auto row = reweighted.row(b, h, q);
                    s.row_sums.push_back(std::accumulate(row.begin(), row.end(), 0.0));
                }
        trace.steps.push_back(std::move(s));
    }
    return trace;
}

}  // namespace emospace
