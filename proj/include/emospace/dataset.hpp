#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "emospace/core.hpp"

namespace emospace {

// Paired visual/text embeddings with categorical labels.
struct EmbeddingDataset {
    Mat visual;   // N x d_v
    Mat textual;  // N x d_t
    std::vector<std::size_t> labels;
    std::vector<std::string> names;  // empty or N entries
    std::size_t classes = 0;         // m

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t visual_dim() const noexcept { return visual.cols(); }
    std::size_t text_dim() const noexcept { return textual.cols(); }

    // Throws InvariantViolation / IndexOutOfRange.
    void validate() const;

    bool operator==(const EmbeddingDataset&) const = default;
};

}  // namespace emospace
