#include "emospace/latent_mapper.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "emospace/optim.hpp"

namespace emospace {

Mapper make_mapper(const MapperConfig& cfg, Rng& rng) {
    if (cfg.input_dim == 0 || cfg.hidden_dim == 0 || cfg.output_dim == 0) {
        fail(ErrorCode::ConfigError, "mapper dimensions must be positive");
    }
    Mapper m;
    m.W1 = gaussian_matrix(cfg.hidden_dim, cfg.input_dim, 1.0 / std::sqrt(static_cast<double>(cfg.input_dim)), rng);
    m.b1.assign(cfg.hidden_dim, 0.0);
    m.W2 = gaussian_matrix(cfg.output_dim, cfg.hidden_dim, 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim)), rng);
    m.b2.assign(cfg.output_dim, 0.0);
    return m;
}

void validate_mapper(const Mapper& m) {
    if (m.W1.empty() || m.W2.empty()) fail(ErrorCode::ShapeMismatch, "mapper has an empty layer");
    if (m.b1.size() != m.W1.rows() || m.W2.cols() != m.W1.rows() || m.b2.size() != m.W2.rows()) {
        fail(ErrorCode::ShapeMismatch, "mapper layer shapes are inconsistent");
    }
    require_finite(m.W1.data(), "mapper W1");
    require_finite(m.b1, "mapper b1");
    require_finite(m.W2.data(), "mapper W2");
    require_finite(m.b2, "mapper b2");
}

Vec map_embedding(std::span<const double> x, const Mapper& mapper) {
    Vec hidden = mat_vec(mapper.W1, x);
    for (std::size_t j = 0; j < hidden.size(); ++j) hidden[j] = gelu(hidden[j] + mapper.b1[j]);
    Vec out = mat_vec(mapper.W2, hidden);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += mapper.b2[j];
    return out;
}

double mapper_loss(std::span<const double> pred, std::span<const double> target, const MapperLossWeights& w) {
    if (pred.size() != target.size()) {
        fail(ErrorCode::DimMismatch, "mapper_loss: " + std::to_string(pred.size()) + " vs " +
                                         std::to_string(target.size()));
    }
    const double np = norm(pred);
    const double nt = norm(target);
    if (!(nt > 0.0)) fail(ErrorCode::ZeroVector, "mapper target has zero norm");
    const double cos = np > 0.0 ? dot(pred, target) / (np * nt) : 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sq += (pred[i] - target[i]) * (pred[i] - target[i]);
    return std::max(0.0, w.lambda_cos * (1.0 - cos)) + w.lambda_euc * sq;
}

double mapper_loss_and_gradients(const Mat& inputs, const Mat& targets, std::span<const std::size_t> rows,
                                 const Mapper& mapper, const MapperLossWeights& w, MapperGradients* grads) {
    if (rows.empty()) fail(ErrorCode::EmptyInput, "mapper loss over no rows");
    if (inputs.cols() != mapper.input_dim() || targets.cols() != mapper.output_dim()) {
        fail(ErrorCode::DimMismatch, "mapper pairs do not match the mapper shape");
    }
    const std::size_t h = mapper.hidden_dim();
    const std::size_t out_dim = mapper.output_dim();
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    if (grads) {
        *grads = {Mat(mapper.W1.rows(), mapper.W1.cols()), Vec(h, 0.0), Mat(mapper.W2.rows(), mapper.W2.cols()),
                  Vec(out_dim, 0.0)};
    }
    double total = 0.0;
    for (std::size_t r : rows) {
        auto x = inputs.row(r);
        auto t = targets.row(r);
        Vec pre = mat_vec(mapper.W1, x);
        Vec act(h);
        for (std::size_t j = 0; j < h; ++j) {
            pre[j] += mapper.b1[j];
            act[j] = gelu(pre[j]);
        }
        Vec y = mat_vec(mapper.W2, act);
        for (std::size_t j = 0; j < out_dim; ++j) y[j] += mapper.b2[j];
        total += mapper_loss(y, t, w);
        if (!grads) continue;

        const double ny = norm(y);
        const double nt = norm(t);
        Vec dy(out_dim);
        const double cos = ny > 0.0 ? dot(y, t) / (ny * nt) : 0.0;
        for (std::size_t j = 0; j < out_dim; ++j) {
            double g = 2.0 * w.lambda_euc * (y[j] - t[j]);
            if (ny > 0.0) g -= w.lambda_cos * (t[j] / (ny * nt) - cos * y[j] / (ny * ny));
            dy[j] = g * inv_n;
        }
        Vec dact(h, 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            grads->b2[o] += dy[o];
            auto wrow = mapper.W2.row(o);
            auto grow = grads->W2.row(o);
            for (std::size_t j = 0; j < h; ++j) {
                grow[j] += dy[o] * act[j];
                dact[j] += dy[o] * wrow[j];
            }
        }
        for (std::size_t j = 0; j < h; ++j) {
            const double dpre = dact[j] * gelu_derivative(pre[j]);
            grads->b1[j] += dpre;
            auto grow = grads->W1.row(j);
            for (std::size_t c = 0; c < x.size(); ++c) grow[c] += dpre * x[c];
        }
    }
    return total * inv_n;
}

MapperTrainResult train_mapper(const Mat& inputs, const Mat& targets, const TrainConfig& cfg,
                               const MapperLossWeights& w) {
    const auto started = std::chrono::steady_clock::now();
    if (inputs.rows() == 0) fail(ErrorCode::EmptyDataset, "mapper training needs at least one pair");
    if (targets.rows() != inputs.rows()) fail(ErrorCode::DimMismatch, "inputs and targets differ in length");
    if (cfg.batch_size == 0) fail(ErrorCode::ConfigError, "batch_size must be positive");
    if (!(cfg.learning_rate >= 0.0)) fail(ErrorCode::ConfigError, "learning_rate must be nonnegative");
    if (w.lambda_cos < 0.0 || w.lambda_euc < 0.0 || !(w.lambda_cos + w.lambda_euc > 0.0)) {
        fail(ErrorCode::ConfigError, "mapper loss weights must be nonnegative with a positive sum");
    }
    require_finite(inputs.data(), "mapper inputs");
    require_finite(targets.data(), "mapper targets");

    Rng rng(cfg.seed);
    MapperTrainResult result;
    result.mapper = make_mapper({inputs.cols(), inputs.cols(), targets.cols()}, rng);
    Mapper& m = result.mapper;

    const AdamConfig adam{cfg.learning_rate};
    AdamState s_w1(1, m.W1.size()), s_b1(1, m.b1.size()), s_w2(1, m.W2.size()), s_b2(1, m.b2.size());
    std::vector<std::size_t> order(inputs.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    MapperGradients g;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            auto rows = std::span<const std::size_t>(order).subspan(begin, end - begin);
            const double loss = mapper_loss_and_gradients(inputs, targets, rows, m, w, &g);
            epoch_loss += loss * static_cast<double>(rows.size()) / static_cast<double>(order.size());
            s_w1.step(m.W1.data(), g.W1.data(), adam);
            s_b1.step(m.b1, g.b1, adam);
            s_w2.step(m.W2.data(), g.W2.data(), adam);
            s_b2.step(m.b2, g.b2, adam);
        }
        result.report.epoch_loss.push_back(epoch_loss);
    }
    result.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

double mean_cosine(const Mat& inputs, const Mat& targets, const Mapper& mapper) {
    if (inputs.rows() == 0) fail(ErrorCode::EmptyInput, "mean_cosine over no pairs");
    double s = 0.0;
    for (std::size_t r = 0; r < inputs.rows(); ++r) s += cosine_sim(map_embedding(inputs.row(r), mapper), targets.row(r));
    return s / static_cast<double>(inputs.rows());
}

}  // namespace emospace
