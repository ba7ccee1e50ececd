#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "emospace/core.hpp"

namespace emospace {

inline constexpr double kDefaultMergeThreshold = 0.3;
inline constexpr double kDefaultSplitThreshold = 0.7;
inline constexpr double kSplitPerturbation = 0.05;

// K unit-norm prototypes with usage counters. Rows stay unit-norm after every
// mutation performed through the functions below.
struct PrototypeBank {
    Mat prototypes;                   // K x d_p
    std::vector<std::uint64_t> usage;  // n_i
    double merge_threshold = kDefaultMergeThreshold;
    double split_threshold = kDefaultSplitThreshold;
    std::uint64_t generation = 0;

    std::size_t size() const noexcept { return prototypes.rows(); }
    std::size_t dim() const noexcept { return prototypes.cols(); }
    std::uint64_t total_usage() const;

    bool operator==(const PrototypeBank&) const = default;
};

// Orthogonally initialized bank with zero usage.
PrototypeBank make_bank(std::size_t count, std::size_t dim, Rng& rng,
                        double merge_threshold = kDefaultMergeThreshold,
                        double split_threshold = kDefaultSplitThreshold);

// Throws InvariantViolation when a row is not unit-norm within `tolerance`,
// thresholds are out of range, or the bank is empty.
void validate_bank(const PrototypeBank& bank, double tolerance = 1e-9);

struct Assignment {
    std::size_t index = 0;
    double similarity = 0.0;
};

// argmax_i cos(f, p_i); ties go to the lowest index.
Assignment assign(std::span<const double> feature, const PrototypeBank& bank);

PrototypeBank update_usage(PrototypeBank bank, std::span<const std::size_t> assignments);

struct MergeReport {
    std::vector<std::vector<std::size_t>> merged_groups;
    std::size_t k_before = 0;
    std::size_t k_after = 0;
    // For every row of the new bank: the old row it was carried from, or
    // nullopt when the row is a freshly merged prototype.
    std::vector<std::optional<std::size_t>> origin;
};

struct SplitReport {
    std::vector<std::size_t> split_indices;
    std::size_t k_before = 0;
    std::size_t k_after = 0;
    std::vector<std::optional<std::size_t>> origin;
};

// Connected components of the graph {(i, j) : cos(p_i, p_j) > tau_m}
// collapse into their usage-weighted mean. A merged prototype takes the
// position of its lowest-index member.
std::pair<PrototypeBank, MergeReport> merge_step(PrototypeBank bank);

// Prototypes with n_i > tau_s * mean(n), at most ceil(max_split_fraction * K)
// of them by descending usage, are each replaced by two perturbed children.
// The first child keeps the parent's row; the second is appended.
std::pair<PrototypeBank, SplitReport> split_step(PrototypeBank bank, Rng& rng, double max_split_fraction = 0.1);

}  // namespace emospace
