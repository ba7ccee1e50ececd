#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "emospace/core.hpp"
#include "emospace/dataset.hpp"
#include "emospace/fusion_net.hpp"
#include "emospace/prototype_bank.hpp"

namespace emospace {

struct LossWeights {
    double alpha = 1.0;  // classification
    double beta = 0.5;   // instance-prototype contrast
    double gamma = 0.1;  // prototype diversity
    double delta = 0.1;  // minimum separation

    void validate() const;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double contrast_temperature = 0.07;
    double distance_margin = 0.5;
    std::size_t adapt_every = 5;
    std::size_t warmup_epochs = 10;
    double max_split_fraction = 0.1;
    std::uint64_t seed = 42;
    std::size_t prototypes = 32;
    std::size_t head_hidden = 16;
    std::size_t gate_hidden = 16;
    std::size_t threads = 1;

    void validate() const;
};

// Mini-batch materialized from dataset rows.
struct Batch {
    Mat visual;
    Mat textual;
    std::vector<std::size_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

Batch make_batch(const EmbeddingDataset& data, std::span<const std::size_t> rows);

// Cross-entropy of softmax(logits) at `label`.
double loss_main(std::span<const double> logits, std::size_t label);
// InfoNCE over the bank with cosine similarities scaled by 1/tau_c.
double loss_contrast(std::span<const double> feature, const PrototypeBank& bank, std::size_t assigned,
                     double temperature);
// Mean squared cosine over unordered prototype pairs.
double loss_diversity(const PrototypeBank& bank);
// Mean squared hinge max(0, margin - |p_i - p_j|)^2 over unordered pairs.
double loss_dist(const PrototypeBank& bank, double margin);

struct LossComponents {
    double main = 0.0;      // batch mean
    double contrast = 0.0;  // batch mean
    double diversity = 0.0;
    double dist = 0.0;
    double total = 0.0;

    bool operator==(const LossComponents&) const = default;
};

// Nearest prototype of each sample's fused feature.
std::vector<std::size_t> batch_assignments(const Batch& batch, const FusionNet& net, const PrototypeBank& bank);

LossComponents composite_loss(const Batch& batch, const FusionNet& net, const PrototypeBank& bank,
                              const LossWeights& w, const TrainConfig& cfg);
// Same, with the prototype assignment of every sample held fixed.
LossComponents composite_loss(const Batch& batch, const FusionNet& net, const PrototypeBank& bank,
                              const LossWeights& w, const TrainConfig& cfg, std::span<const std::size_t> assigned);

struct Gradients {
    Mat W1;
    Mat W2;
    Mat Ug;
    Vec wg;
    Mat prototypes;
};

struct LossAndGradients {
    LossComponents loss;
    Gradients grads;
    std::vector<std::size_t> assignments;
};

// Reverse-mode gradients of composite_loss. Assignments are constants within
// the step. Per-sample work may run on cfg.threads threads; the reduction
// always happens in sample order, so the result does not depend on threads.
LossAndGradients gradients(const Batch& batch, const FusionNet& net, const PrototypeBank& bank, const LossWeights& w,
                           const TrainConfig& cfg);
LossAndGradients gradients(const Batch& batch, const FusionNet& net, const PrototypeBank& bank, const LossWeights& w,
                           const TrainConfig& cfg, std::span<const std::size_t> assigned);

struct EpochRecord {
    std::size_t epoch = 0;
    LossComponents loss;  // sample-weighted mean over the epoch's batches
    double accuracy = 0.0;
    std::size_t prototypes = 0;
    double diversity = 0.0;
    double max_norm_error = 0.0;
    std::uint64_t total_usage = 0;
    bool adapted = false;

    bool operator==(const EpochRecord&) const = default;
};

struct AdaptationRecord {
    std::size_t epoch = 0;
    std::size_t k_before = 0;
    std::size_t k_after_merge = 0;
    std::size_t k_after_split = 0;
    std::size_t merged_groups = 0;
    std::size_t splits = 0;

    bool operator==(const AdaptationRecord&) const = default;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::vector<AdaptationRecord> adaptations;
    double wall_seconds = 0.0;

    // Bank size after each adaptation pass.
    std::vector<std::size_t> k_trajectory() const;
    // Everything except wall time.
    bool same_trajectory(const TrainReport& other) const;
};

nlohmann::json to_json(const LossComponents& loss);
nlohmann::json to_json(const TrainReport& report, bool include_timing);
std::string to_csv(const TrainReport& report);

struct TrainResult {
    FusionNet net;
    PrototypeBank bank;
    TrainReport report;
    Mat fused;  // fused feature of every dataset row under the final net
};

double accuracy(const EmbeddingDataset& data, const FusionNet& net);
Mat fused_features(const EmbeddingDataset& data, const FusionNet& net);

// Initial model for a dataset: fusion net then prototype bank, both drawn from rng.
std::pair<FusionNet, PrototypeBank> initialize_model(const EmbeddingDataset& data, const TrainConfig& cfg, Rng& rng);

TrainResult train(const EmbeddingDataset& data, const TrainConfig& cfg, const LossWeights& w, Rng& rng);
// Continue from an explicit initial model.
TrainResult train(const EmbeddingDataset& data, const TrainConfig& cfg, const LossWeights& w, Rng& rng,
                  FusionNet net, PrototypeBank bank);

}  // namespace emospace
