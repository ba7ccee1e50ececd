#include "emospace/optim.hpp"

#include <cmath>

#include "emospace/error.hpp"

namespace emospace {

AdamState::AdamState(std::size_t rows, std::size_t row_width)
    : row_width_(row_width), m_(rows * row_width, 0.0), v_(rows * row_width, 0.0), steps_(rows, 0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads, const AdamConfig& cfg) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        fail(ErrorCode::ShapeMismatch, "optimizer state does not match the parameter block");
    }
    for (std::size_t r = 0; r < steps_.size(); ++r) {
        const auto t = static_cast<double>(++steps_[r]);
        const double correction1 = 1.0 - std::pow(cfg.beta1, t);
        const double correction2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t i = r * row_width_; i < (r + 1) * row_width_; ++i) {
            m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grads[i];
            v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
            const double m_hat = m_[i] / correction1;
            const double v_hat = v_[i] / correction2;
            params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

void AdamState::remap_rows(const std::vector<std::optional<std::size_t>>& origin) {
    std::vector<double> m(origin.size() * row_width_, 0.0);
    std::vector<double> v(origin.size() * row_width_, 0.0);
    std::vector<std::uint64_t> steps(origin.size(), 0);
    for (std::size_t r = 0; r < origin.size(); ++r) {
        if (!origin[r]) continue;
        const std::size_t src = *origin[r];
        if (src >= steps_.size()) fail(ErrorCode::IndexOutOfRange, "remap_rows: origin row out of range");
        for (std::size_t c = 0; c < row_width_; ++c) {
            m[r * row_width_ + c] = m_[src * row_width_ + c];
            v[r * row_width_ + c] = v_[src * row_width_ + c];
        }
        steps[r] = steps_[src];
    }
    m_ = std::move(m);
    v_ = std::move(v);
    steps_ = std::move(steps);
}

}  // namespace emospace
