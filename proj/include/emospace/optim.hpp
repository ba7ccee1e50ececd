#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace emospace {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam moments for one parameter block. The block is viewed as rows of
// `row_width` entries, each with its own step counter, so rows can be reset
// independently when the prototype bank changes shape.
class AdamState {
public:
    AdamState() = default;
    AdamState(std::size_t rows, std::size_t row_width);

    void step(std::span<double> params, std::span<const double> grads, const AdamConfig& cfg);

    // Rebuild after rows were merged or split: origin[r] names the old row a
    // new row was carried from; nullopt rows start from zero moments.
    void remap_rows(const std::vector<std::optional<std::size_t>>& origin);

    std::size_t rows() const noexcept { return steps_.size(); }

private:
    std::size_t row_width_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
    std::vector<std::uint64_t> steps_;
};

}  // namespace emospace
