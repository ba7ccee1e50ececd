#include "emospace/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

#include "emospace/optim.hpp"

namespace emospace {

void LossWeights::validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0 || delta < 0.0) {
        fail(ErrorCode::ConfigError, "loss weights must be nonnegative");
    }
    if (!(alpha > 0.0 || beta > 0.0 || gamma > 0.0 || delta > 0.0)) {
        fail(ErrorCode::ConfigError, "at least one loss weight must be positive");
    }
}

void TrainConfig::validate() const {
    if (batch_size == 0) fail(ErrorCode::ConfigError, "batch_size must be positive");
    if (!(learning_rate >= 0.0)) fail(ErrorCode::ConfigError, "learning_rate must be nonnegative");
    if (!(contrast_temperature > 0.0)) fail(ErrorCode::ConfigError, "contrast_temperature must be positive");
    if (!(distance_margin > 0.0)) fail(ErrorCode::ConfigError, "distance_margin must be positive");
    if (adapt_every == 0) fail(ErrorCode::ConfigError, "adapt_every must be positive");
    if (!(max_split_fraction > 0.0 && max_split_fraction <= 1.0)) {
        fail(ErrorCode::ConfigError, "max_split_fraction must lie in (0, 1]");
    }
    if (prototypes == 0) fail(ErrorCode::ConfigError, "prototypes must be positive");
    if (head_hidden == 0 || gate_hidden == 0) fail(ErrorCode::ConfigError, "hidden widths must be positive");
    if (threads == 0) fail(ErrorCode::ConfigError, "threads must be positive");
}

Batch make_batch(const EmbeddingDataset& data, std::span<const std::size_t> rows) {
    Batch batch;
    batch.visual = Mat(0, data.visual_dim());
    batch.textual = Mat(0, data.text_dim());
    for (std::size_t r : rows) {
        if (r >= data.size()) fail(ErrorCode::IndexOutOfRange, "batch row " + std::to_string(r) + " out of range");
        batch.visual.append_row(data.visual.row(r));
        batch.textual.append_row(data.textual.row(r));
        batch.labels.push_back(data.labels[r]);
    }
    return batch;
}

namespace {

double log_sum_exp(std::span<const double> xs) {
    const double peak = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += std::exp(x - peak);
    return peak + std::log(s);
}

// Cosine without clamping, so it stays consistent with its derivative.
double raw_cos(std::span<const double> a, std::span<const double> b, double na, double nb) {
    return dot(a, b) / (na * nb);
}

std::size_t pair_count(std::size_t k) { return k * (k - 1) / 2; }

}  // namespace

double loss_main(std::span<const double> logits, std::size_t label) {
    if (logits.empty()) fail(ErrorCode::EmptyInput, "loss_main of empty logits");
    if (label >= logits.size()) {
        fail(ErrorCode::IndexOutOfRange,
             "label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) + " classes");
    }
    return std::max(0.0, log_sum_exp(logits) - logits[label]);
}

double loss_contrast(std::span<const double> feature, const PrototypeBank& bank, std::size_t assigned,
                     double temperature) {
    if (assigned >= bank.size()) fail(ErrorCode::IndexOutOfRange, "assigned prototype out of range");
    if (!(temperature > 0.0)) fail(ErrorCode::InvalidTemperature, "contrast temperature must be > 0");
    if (feature.size() != bank.dim()) fail(ErrorCode::DimMismatch, "feature and prototype dimensions differ");
    const double nf = norm(feature);
    if (!(nf > 0.0)) fail(ErrorCode::ZeroVector, "contrast loss of a zero-norm feature");
    if (bank.size() == 1) return 0.0;
    Vec scaled(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
        auto p = bank.prototypes.row(i);
        scaled[i] = raw_cos(feature, p, nf, norm(p)) / temperature;
    }
    return std::max(0.0, log_sum_exp(scaled) - scaled[assigned]);
}

double loss_diversity(const PrototypeBank& bank) {
    const std::size_t k = bank.size();
    if (k < 2) return 0.0;
    Vec norms(k);
    for (std::size_t i = 0; i < k; ++i) norms[i] = norm(bank.prototypes.row(i));
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double c = raw_cos(bank.prototypes.row(i), bank.prototypes.row(j), norms[i], norms[j]);
            s += c * c;
        }
    }
    return s / static_cast<double>(pair_count(k));
}

double loss_dist(const PrototypeBank& bank, double margin) {
    if (!(margin > 0.0)) fail(ErrorCode::InvalidArgument, "distance margin must be > 0");
    const std::size_t k = bank.size();
    if (k < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        auto pi = bank.prototypes.row(i);
        for (std::size_t j = i + 1; j < k; ++j) {
            auto pj = bank.prototypes.row(j);
            double d2 = 0.0;
            for (std::size_t c = 0; c < pi.size(); ++c) d2 += (pi[c] - pj[c]) * (pi[c] - pj[c]);
            const double gap = margin - std::sqrt(d2);
            if (gap > 0.0) s += gap * gap;
        }
    }
    return s / static_cast<double>(pair_count(k));
}

std::vector<std::size_t> batch_assignments(const Batch& batch, const FusionNet& net, const PrototypeBank& bank) {
    std::vector<std::size_t> out(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
        out[s] = assign(fused_feature(batch.visual.row(s), batch.textual.row(s), net), bank).index;
    }
    return out;
}

namespace {

void check_batch(const Batch& batch, const FusionNet& net, const PrototypeBank& bank,
                 std::span<const std::size_t> assigned) {
    if (batch.size() == 0) fail(ErrorCode::EmptyInput, "empty batch");
    if (assigned.size() != batch.size()) fail(ErrorCode::DimMismatch, "one assignment per sample is required");
    if (batch.visual.cols() != net.visual_dim() || batch.textual.cols() != net.text_dim()) {
        fail(ErrorCode::DimMismatch, "batch embeddings do not match the fusion net");
    }
    if (bank.dim() != net.visual_dim()) {
        fail(ErrorCode::DimMismatch, "prototype dimension " + std::to_string(bank.dim()) +
                                         " differs from the fused feature dimension " +
                                         std::to_string(net.visual_dim()));
    }
    for (std::size_t label : batch.labels) {
        if (label >= net.classes()) {
            fail(ErrorCode::IndexOutOfRange, "label " + std::to_string(label) + " out of range for " +
                                                 std::to_string(net.classes()) + " classes");
        }
    }
    for (std::size_t a : assigned)
        if (a >= bank.size()) fail(ErrorCode::IndexOutOfRange, "assigned prototype out of range");
}

Gradients zero_gradients(const FusionNet& net, const PrototypeBank& bank) {
    return {Mat(net.W1.rows(), net.W1.cols()), Mat(net.W2.rows(), net.W2.cols()), Mat(net.Ug.rows(), net.Ug.cols()),
            Vec(net.wg.size(), 0.0), Mat(bank.size(), bank.dim())};
}

struct SampleTerms {
    double cross_entropy = 0.0;
    double contrast = 0.0;
};

// Forward and backward pass of the per-sample terms. `grads` receives this
// sample's contribution scaled by (alpha / B, beta / B).
SampleTerms sample_pass(std::span<const double> v, std::span<const double> t, std::size_t label,
                        std::size_t assigned, const FusionNet& net, const PrototypeBank& bank, double tau,
                        double main_scale, double contrast_scale, Gradients* grads) {
    SampleTerms terms;
    const std::size_t head = net.W1.cols();
    const std::size_t classes = net.classes();
    const std::size_t d = v.size();

    // Categorical head.
    Vec pre = mat_t_vec(net.W1, v);
    Vec act(head);
    for (std::size_t j = 0; j < head; ++j) act[j] = gelu(pre[j]);
    Vec logits = mat_t_vec(net.W2, act);
    terms.cross_entropy = loss_main(logits, label);

    // Gate and fusion.
    Vec joint(v.begin(), v.end());
    joint.insert(joint.end(), t.begin(), t.end());
    Vec z = mat_vec(net.Ug, joint);
    Vec r(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) r[k] = gelu(z[k]);
    const double g = sigmoid(dot(net.wg, r));
    Vec f(d);
    for (std::size_t i = 0; i < d; ++i) f[i] = g * v[i] + (1.0 - g) * t[i];

    // Contrast against every prototype.
    const std::size_t k_count = bank.size();
    const double nf = norm(f);
    if (!(nf > 0.0)) fail(ErrorCode::ZeroVector, "fused feature has zero norm");
    Vec cosines(k_count), pnorms(k_count), scaled(k_count);
    for (std::size_t i = 0; i < k_count; ++i) {
        auto p = bank.prototypes.row(i);
        pnorms[i] = norm(p);
        cosines[i] = raw_cos(f, p, nf, pnorms[i]);
        scaled[i] = cosines[i] / tau;
    }
    terms.contrast = k_count > 1 ? log_sum_exp(scaled) - scaled[assigned] : 0.0;

    if (grads == nullptr) return terms;

    // d(CE)/d(logits) = softmax - onehot.
    Vec dlogits = softmax(logits, 1.0);
    dlogits[label] -= 1.0;
    for (double& x : dlogits) x *= main_scale;
    Vec dact(head, 0.0);
    for (std::size_t j = 0; j < head; ++j) {
        for (std::size_t c = 0; c < classes; ++c) {
            grads->W2(j, c) = act[j] * dlogits[c];
            dact[j] += net.W2(j, c) * dlogits[c];
        }
    }
    for (std::size_t j = 0; j < head; ++j) dact[j] *= gelu_derivative(pre[j]);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < head; ++j) grads->W1(i, j) = v[i] * dact[j];

    if (k_count < 2) return terms;

    Vec dcos = softmax(scaled, 1.0);
    dcos[assigned] -= 1.0;
    for (double& x : dcos) x *= contrast_scale / tau;

    Vec df(d, 0.0);
    for (std::size_t i = 0; i < k_count; ++i) {
        auto p = bank.prototypes.row(i);
        auto gp = grads->prototypes.row(i);
        const double inv = 1.0 / (nf * pnorms[i]);
        const double f_coef = cosines[i] / (nf * nf);
        const double p_coef = cosines[i] / (pnorms[i] * pnorms[i]);
        for (std::size_t c = 0; c < d; ++c) {
            df[c] += dcos[i] * (p[c] * inv - f_coef * f[c]);
            gp[c] = dcos[i] * (f[c] * inv - p_coef * p[c]);
        }
    }

    double dg = 0.0;
    for (std::size_t i = 0; i < d; ++i) dg += df[i] * (v[i] - t[i]);
    const double ds = dg * g * (1.0 - g);
    for (std::size_t k = 0; k < z.size(); ++k) {
        grads->wg[k] = ds * r[k];
        const double dz = ds * net.wg[k] * gelu_derivative(z[k]);
        auto row = grads->Ug.row(k);
        for (std::size_t c = 0; c < joint.size(); ++c) row[c] = dz * joint[c];
    }
    return terms;
}

void accumulate(Gradients& total, const Gradients& part) {
    const auto add = [](std::vector<double>& dst, const std::vector<double>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };
    add(total.W1.data(), part.W1.data());
    add(total.W2.data(), part.W2.data());
    add(total.Ug.data(), part.Ug.data());
    add(total.wg, part.wg);
    add(total.prototypes.data(), part.prototypes.data());
}

// Diversity and distance gradients, added to `grads->prototypes`.
void bank_term_gradients(const PrototypeBank& bank, const LossWeights& w, double margin, Gradients& grads) {
    const std::size_t k = bank.size();
    if (k < 2) return;
    const std::size_t d = bank.dim();
    const double pairs = static_cast<double>(pair_count(k));
    Vec norms(k);
    for (std::size_t i = 0; i < k; ++i) norms[i] = norm(bank.prototypes.row(i));
    for (std::size_t i = 0; i < k; ++i) {
        auto pi = bank.prototypes.row(i);
        auto gi = grads.prototypes.row(i);
        for (std::size_t j = 0; j < k; ++j) {
            if (j == i) continue;
            auto pj = bank.prototypes.row(j);
            if (w.gamma != 0.0) {
                const double c = raw_cos(pi, pj, norms[i], norms[j]);
                const double scale = w.gamma * 2.0 * c / pairs;
                const double inv = 1.0 / (norms[i] * norms[j]);
                const double self = c / (norms[i] * norms[i]);
                for (std::size_t x = 0; x < d; ++x) gi[x] += scale * (pj[x] * inv - self * pi[x]);
            }
            if (w.delta != 0.0) {
                double d2 = 0.0;
                for (std::size_t x = 0; x < d; ++x) d2 += (pi[x] - pj[x]) * (pi[x] - pj[x]);
                const double dist = std::sqrt(d2);
                const double gap = margin - dist;
                // The hinge has no gradient at coincident prototypes; use zero there.
                if (gap > 0.0 && dist > 0.0) {
                    const double scale = -w.delta * 2.0 * gap / (pairs * dist);
                    for (std::size_t x = 0; x < d; ++x) gi[x] += scale * (pi[x] - pj[x]);
                }
            }
        }
    }
}

LossAndGradients run_batch(const Batch& batch, const FusionNet& net, const PrototypeBank& bank, const LossWeights& w,
                           const TrainConfig& cfg, std::span<const std::size_t> assigned, bool want_grads) {
    check_batch(batch, net, bank, assigned);
    const std::size_t n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double tau = cfg.contrast_temperature;

    std::vector<SampleTerms> terms(n);
    std::vector<Gradients> parts(want_grads ? n : 0);
    const auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            Gradients* g = nullptr;
            if (want_grads) {
                parts[s] = zero_gradients(net, bank);
                g = &parts[s];
            }
            terms[s] = sample_pass(batch.visual.row(s), batch.textual.row(s), batch.labels[s], assigned[s], net, bank,
                                   tau, w.alpha * inv_n, w.beta * inv_n, g);
        }
    };
    const std::size_t threads = std::min(cfg.threads, n);
    if (threads <= 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t begin = 0; begin < n; begin += chunk) pool.emplace_back(work, begin, std::min(n, begin + chunk));
        for (auto& th : pool) th.join();
    }

    LossAndGradients out;
    out.assignments.assign(assigned.begin(), assigned.end());
    for (const SampleTerms& st : terms) {
        out.loss.main += st.cross_entropy;
        out.loss.contrast += st.contrast;
    }
    out.loss.main *= inv_n;
    out.loss.contrast *= inv_n;
    out.loss.diversity = loss_diversity(bank);
    out.loss.dist = loss_dist(bank, cfg.distance_margin);
    out.loss.total = w.alpha * out.loss.main + w.beta * out.loss.contrast + w.gamma * out.loss.diversity +
                     w.delta * out.loss.dist;

    if (want_grads) {
        out.grads = zero_gradients(net, bank);
        for (const Gradients& part : parts) accumulate(out.grads, part);
        bank_term_gradients(bank, w, cfg.distance_margin, out.grads);
    }
    return out;
}

}  // namespace

LossComponents composite_loss(const Batch& batch, const FusionNet& net, const PrototypeBank& bank,
                              const LossWeights& w, const TrainConfig& cfg) {
    const auto assigned = batch_assignments(batch, net, bank);
    return composite_loss(batch, net, bank, w, cfg, assigned);
}

LossComponents composite_loss(const Batch& batch, const FusionNet& net, const PrototypeBank& bank,
                              const LossWeights& w, const TrainConfig& cfg, std::span<const std::size_t> assigned) {
    return run_batch(batch, net, bank, w, cfg, assigned, false).loss;
}

LossAndGradients gradients(const Batch& batch, const FusionNet& net, const PrototypeBank& bank, const LossWeights& w,
                           const TrainConfig& cfg) {
    if (batch.size() == 0) fail(ErrorCode::EmptyInput, "empty batch");
    const auto assigned = batch_assignments(batch, net, bank);
    return gradients(batch, net, bank, w, cfg, assigned);
}

LossAndGradients gradients(const Batch& batch, const FusionNet& net, const PrototypeBank& bank, const LossWeights& w,
                           const TrainConfig& cfg, std::span<const std::size_t> assigned) {
    return run_batch(batch, net, bank, w, cfg, assigned, true);
}

std::vector<std::size_t> TrainReport::k_trajectory() const {
    std::vector<std::size_t> out;
    for (const auto& a : adaptations) out.push_back(a.k_after_split);
    return out;
}

bool TrainReport::same_trajectory(const TrainReport& other) const {
    return epochs == other.epochs && adaptations == other.adaptations;
}

nlohmann::json to_json(const LossComponents& loss) {
    return {{"main", loss.main},
            {"contrast", loss.contrast},
            {"diversity", loss.diversity},
            {"dist", loss.dist},
            {"total", loss.total}};
}

nlohmann::json to_json(const TrainReport& report, bool include_timing) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : report.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"loss", to_json(e.loss)},
                          {"accuracy", e.accuracy},
                          {"prototypes", e.prototypes},
                          {"diversity", e.diversity},
                          {"max_norm_error", e.max_norm_error},
                          {"total_usage", e.total_usage},
                          {"adapted", e.adapted}});
    }
    nlohmann::json adaptations = nlohmann::json::array();
    for (const auto& a : report.adaptations) {
        adaptations.push_back({{"epoch", a.epoch},
                               {"k_before", a.k_before},
                               {"k_after_merge", a.k_after_merge},
                               {"k_after_split", a.k_after_split},
                               {"merged_groups", a.merged_groups},
                               {"splits", a.splits}});
    }
    nlohmann::json out = {{"epochs", epochs}, {"adaptations", adaptations}, {"k_trajectory", report.k_trajectory()}};
    if (!report.epochs.empty()) {
        out["final_accuracy"] = report.epochs.back().accuracy;
        out["final_prototypes"] = report.epochs.back().prototypes;
    }
    if (include_timing) out["wall_seconds"] = report.wall_seconds;
    return out;
}

std::string to_csv(const TrainReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,loss_total,loss_main,loss_contrast,loss_diversity,loss_dist,accuracy,prototypes,diversity,"
          "total_usage,adapted\n";
    for (const auto& e : report.epochs) {
        os << e.epoch << ',' << e.loss.total << ',' << e.loss.main << ',' << e.loss.contrast << ','
           << e.loss.diversity << ',' << e.loss.dist << ',' << e.accuracy << ',' << e.prototypes << ','
           << e.diversity << ',' << e.total_usage << ',' << (e.adapted ? 1 : 0) << '\n';
    }
    return os.str();
}

double accuracy(const EmbeddingDataset& data, const FusionNet& net) {
    if (data.size() == 0) fail(ErrorCode::EmptyDataset, "accuracy of an empty dataset");
    std::size_t correct = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const Vec logits = classify(data.visual.row(s), net);
        const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (best == data.labels[s]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

Mat fused_features(const EmbeddingDataset& data, const FusionNet& net) {
    Mat out(0, data.visual_dim());
    for (std::size_t s = 0; s < data.size(); ++s) out.append_row(fused_feature(data.visual.row(s), data.textual.row(s), net));
    return out;
}

std::pair<FusionNet, PrototypeBank> initialize_model(const EmbeddingDataset& data, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    FusionConfig fc{data.visual_dim(), data.text_dim(), cfg.head_hidden, cfg.gate_hidden, data.classes};
    FusionNet net = make_fusion_net(fc, rng);
    PrototypeBank bank = make_bank(cfg.prototypes, data.visual_dim(), rng);
    return {std::move(net), std::move(bank)};
}

TrainResult train(const EmbeddingDataset& data, const TrainConfig& cfg, const LossWeights& w, Rng& rng) {
    if (data.size() == 0) fail(ErrorCode::EmptyDataset, "cannot train on an empty dataset");
    data.validate();
    auto [net, bank] = initialize_model(data, cfg, rng);
    return train(data, cfg, w, rng, std::move(net), std::move(bank));
}

namespace {

double max_norm_error(const PrototypeBank& bank) {
    double worst = 0.0;
    for (std::size_t i = 0; i < bank.size(); ++i) worst = std::max(worst, std::abs(norm(bank.prototypes.row(i)) - 1.0));
    return worst;
}

void renormalize_rows(PrototypeBank& bank) {
    for (std::size_t i = 0; i < bank.size(); ++i) {
        auto row = bank.prototypes.row(i);
        // Rows already unit-norm to working precision are left bit-identical.
        if (std::abs(norm(row) - 1.0) > 1e-15) normalize_in_place(row);
    }
}

}  // namespace

TrainResult train(const EmbeddingDataset& data, const TrainConfig& cfg, const LossWeights& w, Rng& rng,
                  FusionNet net, PrototypeBank bank) {
    const auto started = std::chrono::steady_clock::now();
    cfg.validate();
    w.validate();
    if (data.size() == 0) fail(ErrorCode::EmptyDataset, "cannot train on an empty dataset");
    data.validate();
    validate_fusion_net(net);
    validate_bank(bank);
    if (net.classes() != data.classes) {
        fail(ErrorCode::IndexOutOfRange, "dataset has " + std::to_string(data.classes) + " classes, net has " +
                                             std::to_string(net.classes()));
    }

    const AdamConfig adam{cfg.learning_rate};
    AdamState s_w1(1, net.W1.size()), s_w2(1, net.W2.size()), s_ug(1, net.Ug.size()), s_wg(1, net.wg.size());
    AdamState s_proto(bank.size(), bank.dim());

    TrainResult result;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        LossComponents epoch_loss;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const Batch batch = make_batch(data, std::span(order).subspan(begin, end - begin));
            const LossAndGradients lg = gradients(batch, net, bank, w, cfg);

            s_w1.step(net.W1.data(), lg.grads.W1.data(), adam);
            s_w2.step(net.W2.data(), lg.grads.W2.data(), adam);
            s_ug.step(net.Ug.data(), lg.grads.Ug.data(), adam);
            s_wg.step(net.wg, lg.grads.wg, adam);
            s_proto.step(bank.prototypes.data(), lg.grads.prototypes.data(), adam);
            renormalize_rows(bank);
            bank = update_usage(std::move(bank), lg.assignments);

            const double share = static_cast<double>(batch.size()) / static_cast<double>(data.size());
            epoch_loss.main += share * lg.loss.main;
            epoch_loss.contrast += share * lg.loss.contrast;
            epoch_loss.diversity += share * lg.loss.diversity;
            epoch_loss.dist += share * lg.loss.dist;
            epoch_loss.total += share * lg.loss.total;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.loss = epoch_loss;
        const std::size_t done = epoch + 1;
        if (done > cfg.warmup_epochs && (done - cfg.warmup_epochs) % cfg.adapt_every == 0) {
            AdaptationRecord adapt;
            adapt.epoch = epoch;
            adapt.k_before = bank.size();
            auto [merged, merge_report] = merge_step(std::move(bank));
            s_proto.remap_rows(merge_report.origin);
            adapt.k_after_merge = merge_report.k_after;
            adapt.merged_groups = merge_report.merged_groups.size();
            auto [split, split_report] = split_step(std::move(merged), rng, cfg.max_split_fraction);
            s_proto.remap_rows(split_report.origin);
            adapt.k_after_split = split_report.k_after;
            adapt.splits = split_report.split_indices.size();
            bank = std::move(split);
            result.report.adaptations.push_back(adapt);
            record.adapted = true;
        }
        record.accuracy = accuracy(data, net);
        record.prototypes = bank.size();
        record.diversity = loss_diversity(bank);
        record.max_norm_error = max_norm_error(bank);
        record.total_usage = bank.total_usage();
        result.report.epochs.push_back(record);
    }

    result.fused = fused_features(data, net);
    result.net = std::move(net);
    result.bank = std::move(bank);
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace emospace
