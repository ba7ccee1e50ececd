#pragma once

#include <cstddef>

#include "emospace/core.hpp"

namespace emospace {

struct FusionConfig {
    std::size_t visual_dim = 32;   // d_v
    std::size_t text_dim = 32;     // d_t
    std::size_t head_hidden = 16;  // columns of W1
    std::size_t gate_hidden = 16;  // rows of Ug
    std::size_t classes = 8;       // m

    // 1024-dim CLIP-H features, 256-wide head, 512-wide gate, 8 classes.
    static FusionConfig full_scale() { return {1024, 1024, 256, 512, 8}; }

    // Throws ConfigError on zero sizes, m < 2, or d_v != d_t.
    void validate() const;
    bool operator==(const FusionConfig&) const = default;
};

// Categorical head  y = W2^T gelu(W1^T v)  and gate
// g = sigmoid(wg^T gelu(Ug [v; t])). Neither layer has a bias.
struct FusionNet {
    Mat W1;  // d_v x head_hidden
    Mat W2;  // head_hidden x m
    Mat Ug;  // gate_hidden x (d_v + d_t)
    Vec wg;  // gate_hidden

    std::size_t visual_dim() const noexcept { return W1.rows(); }
    std::size_t text_dim() const noexcept { return Ug.cols() - W1.rows(); }
    std::size_t classes() const noexcept { return W2.cols(); }
    FusionConfig config() const;

    bool operator==(const FusionNet&) const = default;
};

// Gaussian weights with standard deviation 1/sqrt(fan_in).
FusionNet make_fusion_net(const FusionConfig& cfg, Rng& rng);

// Throws ShapeMismatch / InvariantViolation for inconsistent or non-finite parameters.
void validate_fusion_net(const FusionNet& net);

Vec classify(std::span<const double> visual, const FusionNet& net);
double gate(std::span<const double> visual, std::span<const double> text, const FusionNet& net);
Vec fuse(std::span<const double> visual, std::span<const double> text, double g);

// Convenience: fuse(v, t, gate(v, t, net)).
Vec fused_feature(std::span<const double> visual, std::span<const double> text, const FusionNet& net);

}  // namespace emospace
