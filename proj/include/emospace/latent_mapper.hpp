#pragma once

#include <cstddef>
#include <vector>

#include "emospace/core.hpp"
#include "emospace/training.hpp"

namespace emospace {

struct MapperConfig {
    std::size_t input_dim = 64;
    std::size_t hidden_dim = 64;
    std::size_t output_dim = 48;

    // The full-size bridge: 1024-dim CLIP features to a 768-dim conditioning space.
    static MapperConfig full_scale() { return {1024, 1024, 768}; }
};

// Two-layer MLP  y = W2 gelu(W1 x + b1) + b2.
struct Mapper {
    Mat W1;  // hidden x input
    Vec b1;
    Mat W2;  // output x hidden
    Vec b2;

    std::size_t input_dim() const noexcept { return W1.cols(); }
    std::size_t hidden_dim() const noexcept { return W1.rows(); }
    std::size_t output_dim() const noexcept { return W2.rows(); }

    bool operator==(const Mapper&) const = default;
};

struct MapperLossWeights {
    double lambda_cos = 1.0;
    double lambda_euc = 0.1;
};

Mapper make_mapper(const MapperConfig& cfg, Rng& rng);
void validate_mapper(const Mapper& mapper);

Vec map_embedding(std::span<const double> x, const Mapper& mapper);

// lambda_cos * (1 - cos(pred, target)) + lambda_euc * |pred - target|^2.
// A zero prediction counts as cosine 0 (cosine term = 1).
double mapper_loss(std::span<const double> pred, std::span<const double> target, const MapperLossWeights& w);

struct MapperGradients {
    Mat W1;
    Vec b1;
    Mat W2;
    Vec b2;
};

// Mean mapper_loss over the rows of (inputs, targets) and its gradient.
double mapper_loss_and_gradients(const Mat& inputs, const Mat& targets, std::span<const std::size_t> rows,
                                 const Mapper& mapper, const MapperLossWeights& w, MapperGradients* grads);

struct MapperReport {
    std::vector<double> epoch_loss;
    double wall_seconds = 0.0;
};

struct MapperTrainResult {
    Mapper mapper;
    MapperReport report;
};

// Adam on the mean mapper loss with shuffled mini-batches. Uses
// cfg.epochs, cfg.batch_size, cfg.learning_rate and cfg.seed; the hidden width
// equals the input width.
MapperTrainResult train_mapper(const Mat& inputs, const Mat& targets, const TrainConfig& cfg,
                               const MapperLossWeights& w);

double mean_cosine(const Mat& inputs, const Mat& targets, const Mapper& mapper);

}  // namespace emospace
