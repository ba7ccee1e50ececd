#include "emospace/prototype_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace emospace {

std::uint64_t PrototypeBank::total_usage() const {
    return std::accumulate(usage.begin(), usage.end(), std::uint64_t{0});
}

PrototypeBank make_bank(std::size_t count, std::size_t dim, Rng& rng, double merge_threshold, double split_threshold) {
    if (count == 0) fail(ErrorCode::InvalidArgument, "a prototype bank needs at least one prototype");
    PrototypeBank bank;
    bank.prototypes = orthogonal_init(count, dim, rng);
    bank.usage.assign(count, 0);
    bank.merge_threshold = merge_threshold;
    bank.split_threshold = split_threshold;
    validate_bank(bank);
    return bank;
}

void validate_bank(const PrototypeBank& bank, double tolerance) {
    if (bank.size() == 0 || bank.dim() == 0) fail(ErrorCode::InvariantViolation, "prototype bank is empty");
    if (bank.usage.size() != bank.size()) {
        fail(ErrorCode::InvariantViolation, "usage has " + std::to_string(bank.usage.size()) + " entries for " +
                                                std::to_string(bank.size()) + " prototypes");
    }
    if (!(bank.merge_threshold > -1.0 && bank.merge_threshold < 1.0)) {
        fail(ErrorCode::InvariantViolation, "merge threshold must lie in (-1, 1)");
    }
    if (!(bank.split_threshold > 0.0)) fail(ErrorCode::InvariantViolation, "split threshold must be > 0");
    require_finite(bank.prototypes.data(), "prototype bank");
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const double n = norm(bank.prototypes.row(i));
        if (!(std::abs(n - 1.0) <= tolerance)) {
            fail(ErrorCode::InvariantViolation,
                 "prototype " + std::to_string(i) + " has norm " + std::to_string(n) + ", expected 1");
        }
    }
}

Assignment assign(std::span<const double> feature, const PrototypeBank& bank) {
    if (feature.size() != bank.dim()) {
        fail(ErrorCode::DimMismatch, "feature has dimension " + std::to_string(feature.size()) + ", bank expects " +
                                         std::to_string(bank.dim()));
    }
    if (!(norm(feature) > 0.0)) fail(ErrorCode::ZeroVector, "cannot assign a zero-norm feature");
    Assignment best{0, -2.0};
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const double s = cosine_sim(feature, bank.prototypes.row(i));
        if (s > best.similarity) best = {i, s};
    }
    return best;
}

PrototypeBank update_usage(PrototypeBank bank, std::span<const std::size_t> assignments) {
    for (std::size_t idx : assignments) {
        if (idx >= bank.size()) {
            fail(ErrorCode::IndexOutOfRange,
                 "assignment " + std::to_string(idx) + " out of range for K=" + std::to_string(bank.size()));
        }
    }
    for (std::size_t idx : assignments) ++bank.usage[idx];
    return bank;
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

}  // namespace

std::pair<PrototypeBank, MergeReport> merge_step(PrototypeBank bank) {
    const std::size_t k = bank.size();
    MergeReport report;
    report.k_before = k;

    std::vector<std::size_t> parent(k);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            if (cosine_sim(bank.prototypes.row(i), bank.prototypes.row(j)) > bank.merge_threshold) {
                const std::size_t a = find_root(parent, i);
                const std::size_t b = find_root(parent, j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
        }
    }

    // Members in ascending order; the root is always the lowest index.
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < k; ++i) members[find_root(parent, i)].push_back(i);

    PrototypeBank out;
    out.prototypes = Mat(0, bank.dim());
    out.merge_threshold = bank.merge_threshold;
    out.split_threshold = bank.split_threshold;
    out.generation = bank.generation + 1;

    for (std::size_t i = 0; i < k; ++i) {
        if (find_root(parent, i) != i) continue;
        const auto& group = members[i];
        if (group.size() == 1) {
            out.prototypes.append_row(bank.prototypes.row(i));
            out.usage.push_back(bank.usage[i]);
            report.origin.emplace_back(i);
            continue;
        }
        std::uint64_t total = 0;
        for (std::size_t g : group) total += bank.usage[g];
        Vec merged(bank.dim(), 0.0);
        for (std::size_t g : group) {
            const double weight = total > 0 ? static_cast<double>(bank.usage[g]) / static_cast<double>(total)
                                            : 1.0 / static_cast<double>(group.size());
            auto p = bank.prototypes.row(g);
            for (std::size_t c = 0; c < merged.size(); ++c) merged[c] += weight * p[c];
        }
        const double n = norm(merged);
        if (!(n > 1e-12)) {
            // Members cancel out; keep the most used one (lowest index on ties).
            std::size_t keep = group.front();
            for (std::size_t g : group)
                if (bank.usage[g] > bank.usage[keep]) keep = g;
            merged.assign(bank.prototypes.row(keep).begin(), bank.prototypes.row(keep).end());
        } else {
            for (double& x : merged) x /= n;
        }
        out.prototypes.append_row(merged);
        out.usage.push_back(total);
        report.origin.emplace_back(std::nullopt);
        report.merged_groups.push_back(group);
    }
    report.k_after = out.size();
    return {std::move(out), std::move(report)};
}

std::pair<PrototypeBank, SplitReport> split_step(PrototypeBank bank, Rng& rng, double max_split_fraction) {
    if (!(max_split_fraction > 0.0 && max_split_fraction <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "max_split_fraction must lie in (0, 1]");
    }
    const std::size_t k = bank.size();
    SplitReport report;
    report.k_before = k;

    const double mean_usage = static_cast<double>(bank.total_usage()) / static_cast<double>(k);
    const double threshold = bank.split_threshold * mean_usage;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < k; ++i)
        if (static_cast<double>(bank.usage[i]) > threshold) candidates.push_back(i);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return bank.usage[a] > bank.usage[b]; });
    // The small slack keeps products like 0.1 * 10 from rounding up to 2.
    const auto cap = static_cast<std::size_t>(std::ceil(max_split_fraction * static_cast<double>(k) - 1e-9));
    if (candidates.size() > cap) candidates.resize(cap);
    std::sort(candidates.begin(), candidates.end());

    for (std::size_t i = 0; i < k; ++i) report.origin.emplace_back(i);
    for (std::size_t idx : candidates) {
        auto parent = bank.prototypes.row(idx);
        Vec direction;
        double dn = 0.0;
        do {
            direction = gaussian_vector(bank.dim(), 1.0, rng);
            const double along = dot(direction, parent);
            for (std::size_t c = 0; c < direction.size(); ++c) direction[c] -= along * parent[c];
            dn = norm(direction);
        } while (!(dn > 1e-12) && bank.dim() > 1);
        Vec plus(parent.begin(), parent.end());
        Vec minus(parent.begin(), parent.end());
        if (dn > 1e-12) {
            for (std::size_t c = 0; c < plus.size(); ++c) {
                plus[c] += kSplitPerturbation * direction[c] / dn;
                minus[c] -= kSplitPerturbation * direction[c] / dn;
            }
            normalize_in_place(plus);
            normalize_in_place(minus);
        }
        const std::uint64_t n = bank.usage[idx];
        std::copy(plus.begin(), plus.end(), bank.prototypes.row(idx).begin());
        bank.usage[idx] = n / 2;
        bank.prototypes.append_row(minus);
        bank.usage.push_back(n - n / 2);
        report.origin[idx] = std::nullopt;
        report.origin.emplace_back(std::nullopt);
    }
    report.split_indices = std::move(candidates);
    report.k_after = bank.size();
    bank.generation += 1;
    return {std::move(bank), std::move(report)};
}

}  // namespace emospace
