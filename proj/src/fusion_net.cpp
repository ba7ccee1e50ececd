#include "emospace/fusion_net.hpp"

#include <cmath>
#include <string>

namespace emospace {

void FusionConfig::validate() const {
    if (visual_dim == 0 || text_dim == 0 || head_hidden == 0 || gate_hidden == 0) {
        fail(ErrorCode::ConfigError, "fusion dimensions must be positive");
    }
    if (classes < 2) fail(ErrorCode::ConfigError, "need at least 2 classes, got " + std::to_string(classes));
    if (visual_dim != text_dim) {
        fail(ErrorCode::ConfigError, "gated fusion needs d_v == d_t (got " + std::to_string(visual_dim) + " and " +
                                         std::to_string(text_dim) + ")");
    }
}

FusionConfig FusionNet::config() const { return {visual_dim(), text_dim(), W1.cols(), Ug.rows(), classes()}; }

FusionNet make_fusion_net(const FusionConfig& cfg, Rng& rng) {
    cfg.validate();
    FusionNet net;
    const auto std_for = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
    net.W1 = gaussian_matrix(cfg.visual_dim, cfg.head_hidden, std_for(cfg.visual_dim), rng);
    net.W2 = gaussian_matrix(cfg.head_hidden, cfg.classes, std_for(cfg.head_hidden), rng);
    net.Ug = gaussian_matrix(cfg.gate_hidden, cfg.visual_dim + cfg.text_dim, std_for(cfg.visual_dim + cfg.text_dim),
                             rng);
    net.wg = gaussian_vector(cfg.gate_hidden, std_for(cfg.gate_hidden), rng);
    return net;
}

void validate_fusion_net(const FusionNet& net) {
    if (net.W1.empty() || net.W2.empty() || net.Ug.empty() || net.wg.empty()) {
        fail(ErrorCode::ShapeMismatch, "fusion net has an empty parameter block");
    }
    if (net.W2.rows() != net.W1.cols()) fail(ErrorCode::ShapeMismatch, "W2 rows must equal W1 columns");
    if (net.Ug.rows() != net.wg.size()) fail(ErrorCode::ShapeMismatch, "Ug rows must equal the size of wg");
    if (net.Ug.cols() <= net.W1.rows()) fail(ErrorCode::ShapeMismatch, "Ug must see both modalities");
    net.config().validate();
    require_finite(net.W1.data(), "W1");
    require_finite(net.W2.data(), "W2");
    require_finite(net.Ug.data(), "Ug");
    require_finite(net.wg, "wg");
}

Vec classify(std::span<const double> visual, const FusionNet& net) {
    Vec hidden = mat_t_vec(net.W1, visual);
    for (double& h : hidden) h = gelu(h);
    return mat_t_vec(net.W2, hidden);
}

double gate(std::span<const double> visual, std::span<const double> text, const FusionNet& net) {
    if (visual.size() != net.visual_dim() || text.size() != net.text_dim()) {
        fail(ErrorCode::DimMismatch, "gate expects (" + std::to_string(net.visual_dim()) + ", " +
                                         std::to_string(net.text_dim()) + ") inputs, got (" +
                                         std::to_string(visual.size()) + ", " + std::to_string(text.size()) + ")");
    }
    Vec joint(visual.begin(), visual.end());
    joint.insert(joint.end(), text.begin(), text.end());
    Vec hidden = mat_vec(net.Ug, joint);
    for (double& h : hidden) h = gelu(h);
    return sigmoid(dot(net.wg, hidden));
}

Vec fuse(std::span<const double> visual, std::span<const double> text, double g) {
    if (!(g >= 0.0 && g <= 1.0)) fail(ErrorCode::InvalidGate, "gate value " + std::to_string(g) + " outside [0, 1]");
    if (visual.size() != text.size()) {
        fail(ErrorCode::DimMismatch, "fuse: " + std::to_string(visual.size()) + " vs " + std::to_string(text.size()));
    }
    Vec f(visual.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = g * visual[i] + (1.0 - g) * text[i];
    return f;
}

Vec fused_feature(std::span<const double> visual, std::span<const double> text, const FusionNet& net) {
    return fuse(visual, text, gate(visual, text, net));
}

}  // namespace emospace
