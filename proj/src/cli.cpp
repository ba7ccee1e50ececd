#include "emospace/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include "emospace/stats_eval.hpp"

namespace emospace::cli {

namespace {

using nlohmann::json;
using Setter = std::function<void(const json&, const std::string&)>;

[[noreturn]] void bad_type(const std::string& key, const char* expected) {
    fail(ErrorCode::ConfigError, "config key '" + key + "' must be " + expected);
}

std::size_t as_count(const json& v, const std::string& key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        bad_type(key, "a nonnegative integer");
    }
    return v.get<std::size_t>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        bad_type(key, "a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

double as_number(const json& v, const std::string& key) {
    if (!v.is_number()) bad_type(key, "a number");
    return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) bad_type(key, "a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) bad_type(key, "a string");
    return v.get<std::string>();
}

void apply_section(const json& section, const std::string& name, const std::map<std::string, Setter>& setters) {
    if (!section.is_object()) bad_type(name, "an object");
    for (const auto& [key, value] : section.items()) {
        const std::string path = name + "." + key;
        auto it = setters.find(key);
        if (it == setters.end()) fail(ErrorCode::ConfigError, "unknown config key '" + path + "'");
        it->second(value, path);
    }
}

template <typename T>
Setter count_into(T& field) {
    return [&field](const json& v, const std::string& k) { field = as_count(v, k); };
}

Setter number_into(double& field) {
    return [&field](const json& v, const std::string& k) { field = as_number(v, k); };
}

Setter seed_into(std::uint64_t& field) {
    return [&field](const json& v, const std::string& k) { field = as_u64(v, k); };
}

Setter string_into(std::string& field) {
    return [&field](const json& v, const std::string& k) { field = as_string(v, k); };
}

}  // namespace

void RunConfig::validate() const {
    const auto wrap = [](const char* section, const auto& fn) {
        try {
            fn();
        } catch (const Error& e) {
            fail(ErrorCode::ConfigError, std::string(section) + ": " + e.what());
        }
    };
    wrap("synth", [&] { synth.validate(); });
    wrap("train", [&] { train.validate(); });
    wrap("loss_weights", [&] { loss_weights.validate(); });
    wrap("guidance", [&] { guidance.validate(); });
    wrap("blend", [&] { blend.validate(); });
    if (!(merge_threshold >= -1.0 && merge_threshold <= 1.0)) {
        fail(ErrorCode::ConfigError, "train.merge_threshold must lie in [-1, 1]");
    }
    if (!(split_threshold > 0.0)) fail(ErrorCode::ConfigError, "train.split_threshold must be positive");
    if (heads == 0) fail(ErrorCode::ConfigError, "guidance.heads must be positive");
    if (refine.max_iters == 0) fail(ErrorCode::ConfigError, "refine.max_iters must be at least 1");
    if (!(refine.eps_conv > 0.0)) fail(ErrorCode::ConfigError, "refine.eps_conv must be positive");
}

RunConfig parse_run_config(const json& doc) {
    RunConfig cfg;
    if (!doc.is_object()) fail(ErrorCode::ConfigError, "config must be a JSON object");
    std::map<std::string, std::function<void(const json&)>> sections;
    sections["synth"] = [&](const json& s) {
        SynthConfig& c = cfg.synth;
        apply_section(s, "synth",
                      {{"dim", count_into(c.dim)},
                       {"categories", count_into(c.categories)},
                       {"subclusters_per_category", count_into(c.subclusters_per_category)},
                       {"samples_per_subcluster", count_into(c.samples_per_subcluster)},
                       {"visual_noise", number_into(c.visual_noise)},
                       {"text_noise", number_into(c.text_noise)},
                       {"cross_modal_correlation", number_into(c.cross_modal_correlation)},
                       {"seed", seed_into(c.seed)}});
    };
    sections["train"] = [&](const json& s) {
        TrainConfig& c = cfg.train;
        apply_section(s, "train",
                      {{"epochs", count_into(c.epochs)},
                       {"batch_size", count_into(c.batch_size)},
                       {"learning_rate", number_into(c.learning_rate)},
                       {"contrast_temperature", number_into(c.contrast_temperature)},
                       {"distance_margin", number_into(c.distance_margin)},
                       {"adapt_every", count_into(c.adapt_every)},
                       {"warmup_epochs", count_into(c.warmup_epochs)},
                       {"max_split_fraction", number_into(c.max_split_fraction)},
                       {"seed", seed_into(c.seed)},
                       {"prototypes", count_into(c.prototypes)},
                       {"head_hidden", count_into(c.head_hidden)},
                       {"gate_hidden", count_into(c.gate_hidden)},
                       {"threads", count_into(c.threads)},
                       {"merge_threshold", number_into(cfg.merge_threshold)},
                       {"split_threshold", number_into(cfg.split_threshold)}});
    };
    sections["loss_weights"] = [&](const json& s) {
        LossWeights& w = cfg.loss_weights;
        apply_section(s, "loss_weights",
                      {{"alpha", number_into(w.alpha)},
                       {"beta", number_into(w.beta)},
                       {"gamma", number_into(w.gamma)},
                       {"delta", number_into(w.delta)}});
    };
    sections["guidance"] = [&](const json& s) {
        GuidanceConfig& g = cfg.guidance;
        apply_section(s, "guidance",
                      {{"k_pos", count_into(g.k_pos)},
                       {"k_neg", count_into(g.k_neg)},
                       {"tau_temp", number_into(g.tau_temp)},
                       {"alpha_attn", number_into(g.alpha_attn)},
                       {"neg_scale", number_into(g.neg_scale)},
                       {"heads", count_into(cfg.heads)},
                       {"renormalize_rows",
                        [&g](const json& v, const std::string& k) { g.renormalize_rows = as_bool(v, k); }}});
    };
    sections["blend"] = [&](const json& s) {
        BlendSchedule& b = cfg.blend;
        apply_section(s, "blend",
                      {{"total_steps", count_into(b.total_steps)},
                       {"ramp_start", number_into(b.ramp_start)},
                       {"ramp_end", number_into(b.ramp_end)}});
    };
    sections["refine"] = [&](const json& s) {
        RefineSettings& r = cfg.refine;
        apply_section(s, "refine",
                      {{"max_iters", count_into(r.max_iters)},
                       {"eps_conv", number_into(r.eps_conv)},
                       {"oracle_url", string_into(r.oracle_url)},
                       {"timeout_seconds", count_into(r.timeout_seconds)}});
    };
    sections["paths"] = [&](const json& s) {
        Paths& p = cfg.paths;
        apply_section(s, "paths",
                      {{"dataset", string_into(p.dataset)},
                       {"checkpoint", string_into(p.checkpoint)},
                       {"report", string_into(p.report)},
                       {"lexicon", string_into(p.lexicon)}});
    };
    for (const auto& [key, value] : doc.items()) {
        auto it = sections.find(key);
        if (it == sections.end()) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
        it->second(value);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigError, "config " + path.string() + " is not valid JSON at byte " +
                                         std::to_string(e.byte) + ": " + e.what());
    }
    return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
    const SynthConfig& s = cfg.synth;
    const TrainConfig& t = cfg.train;
    const GuidanceConfig& g = cfg.guidance;
    return {{"synth",
             {{"dim", s.dim},
              {"categories", s.categories},
              {"subclusters_per_category", s.subclusters_per_category},
              {"samples_per_subcluster", s.samples_per_subcluster},
              {"visual_noise", s.visual_noise},
              {"text_noise", s.text_noise},
              {"cross_modal_correlation", s.cross_modal_correlation},
              {"seed", s.seed}}},
            {"train",
             {{"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"contrast_temperature", t.contrast_temperature},
              {"distance_margin", t.distance_margin},
              {"adapt_every", t.adapt_every},
              {"warmup_epochs", t.warmup_epochs},
              {"max_split_fraction", t.max_split_fraction},
              {"seed", t.seed},
              {"prototypes", t.prototypes},
              {"head_hidden", t.head_hidden},
              {"gate_hidden", t.gate_hidden},
              {"threads", t.threads},
              {"merge_threshold", cfg.merge_threshold},
              {"split_threshold", cfg.split_threshold}}},
            {"loss_weights",
             {{"alpha", cfg.loss_weights.alpha},
              {"beta", cfg.loss_weights.beta},
              {"gamma", cfg.loss_weights.gamma},
              {"delta", cfg.loss_weights.delta}}},
            {"guidance",
             {{"k_pos", g.k_pos},
              {"k_neg", g.k_neg},
              {"tau_temp", g.tau_temp},
              {"alpha_attn", g.alpha_attn},
              {"neg_scale", g.neg_scale},
              {"heads", cfg.heads},
              {"renormalize_rows", g.renormalize_rows}}},
            {"blend",
             {{"total_steps", cfg.blend.total_steps},
              {"ramp_start", cfg.blend.ramp_start},
              {"ramp_end", cfg.blend.ramp_end}}},
            {"refine",
             {{"max_iters", cfg.refine.max_iters},
              {"eps_conv", cfg.refine.eps_conv},
              {"oracle_url", cfg.refine.oracle_url},
              {"timeout_seconds", cfg.refine.timeout_seconds}}},
            {"paths",
             {{"dataset", cfg.paths.dataset},
              {"checkpoint", cfg.paths.checkpoint},
              {"report", cfg.paths.report},
              {"lexicon", cfg.paths.lexicon}}}};
}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigError:
            return kConfig;
        case ErrorCode::IoError:
        case ErrorCode::FormatError:
        case ErrorCode::VersionError:
            return kIo;
        case ErrorCode::InvariantViolation:
            return kInternal;
        default:
            return kDomain;
    }
}

namespace {

struct Context {
    std::ostream& out;
    std::ostream& err;
    RunConfig cfg;
    std::optional<std::uint64_t> seed_flag;
};

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv(kSeedVariable);
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    try {
        std::size_t used = 0;
        const std::string s(raw);
        if (s.front() == '-') throw std::invalid_argument(s);
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ConfigError, std::string(kSeedVariable) + " is not a nonnegative integer: '" + raw + "'");
    }
}

// Flag, then environment, then whatever the config (or its default) holds.
void apply_seed_precedence(Context& ctx) {
    std::optional<std::uint64_t> seed = ctx.seed_flag;
    if (!seed) seed = env_seed();
    if (seed) {
        ctx.cfg.synth.seed = *seed;
        ctx.cfg.train.seed = *seed;
    }
}

Lexicon resolve_lexicon(const RunConfig& cfg) {
    if (!cfg.paths.lexicon.empty()) return load_lexicon(cfg.paths.lexicon);
    const std::filesystem::path bundled = std::filesystem::path(EMOSPACE_DATA_DIR) / "lexicon_v1.json";
    if (std::filesystem::exists(bundled)) return load_lexicon(bundled);
    return build_default_lexicon();
}

void write_json_file(const std::string& path, const json& doc) { write_file(path, doc.dump(2) + "\n"); }

Vec read_query_file(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::FormatError, "query file " + path + " is not valid JSON at byte " + std::to_string(e.byte));
    }
    if (!doc.is_array() || doc.empty()) fail(ErrorCode::FormatError, "query file must hold a nonempty number array");
    Vec q;
    for (const auto& x : doc) {
        if (!x.is_number()) fail(ErrorCode::FormatError, "query file must hold a nonempty number array");
        q.push_back(x.get<double>());
    }
    return q;
}

int cmd_synth(Context& ctx, const std::string& out_path) {
    const SynthConfig& sc = ctx.cfg.synth;
    if (!sc.validate()) {
        ctx.err << "warning: categories * subclusters (" << sc.categories * sc.subclusters_per_category
                << ") exceeds dim (" << sc.dim << "); clusters may not be separable\n";
    }
    const EmbeddingDataset data = generate_synthetic(sc);
    save_dataset(data, out_path);
    ctx.out << json{{"N", data.size()}, {"d", data.visual_dim()}, {"m", data.classes}, {"path", out_path},
                    {"seed", sc.seed}}
                   .dump()
            << "\n";
    ctx.err << "wrote " << data.size() << " samples to " << out_path << "\n";
    return kOk;
}

struct TrainPaths {
    std::string dataset;
    std::string checkpoint;
    std::string report;
    std::string csv;
};

int cmd_train(Context& ctx, const TrainPaths& p) {
    const RunConfig& cfg = ctx.cfg;
    const EmbeddingDataset data = load_dataset(p.dataset);
    data.validate();
    if (data.size() == 0) fail(ErrorCode::EmptyDataset, "dataset " + p.dataset + " has no rows");

    Rng rng(cfg.train.seed);
    auto [net, bank] = initialize_model(data, cfg.train, rng);
    bank.merge_threshold = cfg.merge_threshold;
    bank.split_threshold = cfg.split_threshold;
    GuidanceConfig guidance = cfg.guidance;
    guidance.Wp = make_guidance_config(cfg.heads, data.visual_dim(), rng).Wp;

    const TrainResult result = train(data, cfg.train, cfg.loss_weights, rng, std::move(net), std::move(bank));

    Checkpoint ckpt{result.net, result.bank, guidance, std::nullopt, cfg.train.seed, to_json(cfg)};
    save_checkpoint(ckpt, p.checkpoint);

    const json report = to_json(result.report, false);
    if (!p.report.empty()) write_json_file(p.report, report);
    if (!p.csv.empty()) write_file(p.csv, to_csv(result.report));

    const double acc = accuracy(data, result.net);
    ctx.out << json{{"checkpoint", p.checkpoint},
                    {"final_accuracy", acc},
                    {"prototypes", result.bank.size()},
                    {"seed", cfg.train.seed},
                    {"report", report}}
                   .dump()
            << "\n";
    ctx.err << "accuracy " << acc << ", K = " << result.bank.size() << ", " << result.report.epochs.size()
            << " epochs in " << result.report.wall_seconds << " s\n";
    return kOk;
}

struct GuideArgs {
    std::string checkpoint;
    std::string word;
    std::string query_path;
    std::optional<std::size_t> k;
    std::optional<std::size_t> k_neg;
    std::optional<double> tau;
};

Vec guide_query(const RunConfig& cfg, const std::string& word, const std::string& query_path) {
    if (!word.empty() && !query_path.empty()) fail(ErrorCode::ConfigError, "give either --word or --query, not both");
    if (!query_path.empty()) return read_query_file(query_path);
    if (word.empty()) fail(ErrorCode::ConfigError, "one of --word or --query is required");
    const Lexicon lexicon = resolve_lexicon(cfg);
    return lexicon.at(word).embedding;
}

int cmd_guide(Context& ctx, const GuideArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    GuidanceConfig g = ckpt.guidance;
    if (a.k) g.k_pos = *a.k;
    if (a.k_neg) g.k_neg = *a.k_neg;
    if (a.tau) g.tau_temp = *a.tau;
    g.k_neg = std::min(g.k_neg, ckpt.bank.size());
    g.validate();
    const Vec query = guide_query(ctx.cfg, a.word, a.query_path);
    const GuidanceResult result = multi_prototype_guidance(query, ckpt.bank, g);
    ctx.out << to_json(result).dump() << "\n";
    ctx.err << "top prototype " << result.indices.front() << " with weight " << result.weights.front() << "\n";
    return kOk;
}

struct RefineArgs {
    std::string checkpoint;
    std::string prompt;
    std::string target;
    bool via_bank = false;
    std::optional<std::size_t> max_iters;
    std::optional<double> eps;
};

int cmd_refine(Context& ctx, const RefineArgs& a) {
    const RunConfig& cfg = ctx.cfg;
    const Lexicon lexicon = resolve_lexicon(cfg);
    Vec p_emo = lexicon.at(a.target).embedding;
    if (a.via_bank) {
        if (a.checkpoint.empty()) fail(ErrorCode::ConfigError, "--via-bank needs --checkpoint");
        const Checkpoint ckpt = load_checkpoint(a.checkpoint);
        GuidanceConfig g = ckpt.guidance;
        g.k_neg = 0;
        p_emo = multi_prototype_guidance(p_emo, ckpt.bank, g).p_emo;
    }
    const std::size_t max_iters = a.max_iters.value_or(cfg.refine.max_iters);
    const double eps = a.eps.value_or(cfg.refine.eps_conv);
    if (max_iters == 0) fail(ErrorCode::ConfigError, "--max-iters must be at least 1");
    if (!(eps > 0.0)) fail(ErrorCode::ConfigError, "--eps must be positive");

    LexiconEmbedder embedder(lexicon);
    std::unique_ptr<CandidateGenerator> gen;
    if (cfg.refine.oracle_url.empty()) {
        gen = std::make_unique<LexiconGenerator>(lexicon);
    } else {
        gen = std::make_unique<HttpCandidateGenerator>(cfg.refine.oracle_url,
                                                       std::chrono::seconds(cfg.refine.timeout_seconds));
    }
    const RefinementTrace trace = refine(a.prompt, p_emo, *gen, embedder, max_iters, eps);
    ctx.out << to_json(trace).dump() << "\n";
    ctx.err << "final prompt: " << trace.final_prompt() << " (" << to_string(trace.stop_reason) << ")\n";
    return kOk;
}

struct TraceArgs {
    std::string checkpoint;
    std::string word;
    std::string query_path;
    std::string content;
    std::optional<std::size_t> steps;
    std::optional<double> ramp_start;
    std::optional<double> ramp_end;
    bool renormalize = false;
};

int cmd_trace(Context& ctx, const TraceArgs& a) {
    const RunConfig& cfg = ctx.cfg;
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    BlendSchedule schedule = cfg.blend;
    if (a.steps) schedule.total_steps = *a.steps;
    if (a.ramp_start) schedule.ramp_start = *a.ramp_start;
    if (a.ramp_end) schedule.ramp_end = *a.ramp_end;
    try {
        schedule.validate();
    } catch (const Error& e) {
        fail(ErrorCode::ConfigError, e.what());
    }
    GuidanceConfig g = ckpt.guidance;
    g.k_neg = std::min(g.k_neg, ckpt.bank.size());
    if (a.renormalize) g.renormalize_rows = true;

    const Vec query = guide_query(cfg, a.word, a.query_path);
    const Lexicon lexicon = resolve_lexicon(cfg);
    LexiconEmbedder embedder(lexicon);
    const Vec content = embedder.embed(a.content);

    Rng rng(ckpt.seed);
    const Tensor4 fixture = attention_fixture(1, g.Wp.rows(), 4, 6, 8, rng);
    const GuidanceTrace trace = guidance_trace(content, query, ckpt.bank, g, schedule, fixture);
    for (const TraceStep& step : trace.steps) ctx.out << to_json(step).dump() << "\n";
    ctx.err << trace.steps.size() << " steps, final cos to target " << trace.steps.back().cos_to_target << "\n";
    return kOk;
}

int cmd_stats(Context& ctx, const std::string& which, const std::string& csv_path) {
    const std::string text = read_file(csv_path);
    if (which == "kappa") {
        const PairwiseKappa result = pairwise_kappa(parse_annotation_csv(text));
        ctx.out << to_json(result).dump() << "\n";
        ctx.err << "mean kappa " << result.mean << " +/- " << result.stddev << " over " << result.pairs.size()
                << " pairs\n";
    } else {
        const FriedmanResult result = friedman_test(parse_rating_csv(text));
        ctx.out << to_json(result).dump() << "\n";
        ctx.err << "chi2 " << result.chi2 << ", p " << result.p_value << "\n";
    }
    return kOk;
}

int cmd_lexicon(Context& ctx, const std::string& out_path, std::size_t dim, std::uint64_t seed) {
    const std::string text = lexicon_to_json(build_default_lexicon(dim, seed)).dump(2) + "\n";
    if (out_path.empty()) {
        ctx.out << text;
    } else {
        write_file(out_path, text);
        ctx.err << "wrote lexicon to " << out_path << "\n";
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Emotion prototype space toolkit", "emospace"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_value = 0;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed override (beats EMOSPACE_SEED and config)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic embedding dataset");
    std::string synth_out;
    synth->add_option("--out,-o", synth_out, "Output dataset path");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the fusion net and prototype bank");
    TrainPaths train_paths;
    std::size_t epochs = 0, threads = 1;
    train_cmd->add_option("--data,-d", train_paths.dataset, "Dataset path");
    train_cmd->add_option("--out,-o", train_paths.checkpoint, "Checkpoint output path");
    train_cmd->add_option("--report", train_paths.report, "Training report JSON path");
    train_cmd->add_option("--csv", train_paths.csv, "Per-epoch CSV path");
    auto* epochs_opt = train_cmd->add_option("--epochs", epochs, "Epoch count");
    auto* threads_opt = train_cmd->add_option("--threads", threads, "Worker threads for gradient evaluation");

    // guide
    auto* guide = app.add_subcommand("guide", "Multi-prototype guidance for a query");
    GuideArgs guide_args;
    std::size_t k = 0, k_neg = 0;
    double tau = 0.0;
    guide->add_option("--checkpoint,-c", guide_args.checkpoint, "Checkpoint path")->required();
    guide->add_option("--word,-w", guide_args.word, "Lexicon word used as the query");
    guide->add_option("--query,-q", guide_args.query_path, "JSON array holding the query embedding");
    auto* k_opt = guide->add_option("--k", k, "Number of positive prototypes");
    auto* k_neg_opt = guide->add_option("--k-neg", k_neg, "Number of negative prototypes");
    auto* tau_opt = guide->add_option("--tau", tau, "Softmax temperature");

    // refine
    auto* refine_cmd = app.add_subcommand("refine", "Iteratively refine a prompt toward an emotion");
    RefineArgs refine_args;
    std::size_t max_iters = 0;
    double eps = 0.0;
    refine_cmd->add_option("--checkpoint,-c", refine_args.checkpoint, "Checkpoint path (with --via-bank)");
    refine_cmd->add_option("--prompt,-p", refine_args.prompt, "Initial prompt")->required();
    refine_cmd->add_option("--target,-t", refine_args.target, "Target lexicon word")->required();
    refine_cmd->add_flag("--via-bank", refine_args.via_bank, "Route the target through prototype guidance");
    auto* iters_opt = refine_cmd->add_option("--max-iters", max_iters, "Maximum oracle rounds");
    auto* eps_opt = refine_cmd->add_option("--eps", eps, "Convergence threshold");

    // trace
    auto* trace_cmd = app.add_subcommand("trace", "Step-by-step blending and attention reweighting trace");
    TraceArgs trace_args;
    std::size_t steps = 0;
    double ramp_start = 0.0, ramp_end = 0.0;
    trace_args.content = "a quiet landscape";
    trace_cmd->add_option("--checkpoint,-c", trace_args.checkpoint, "Checkpoint path")->required();
    trace_cmd->add_option("--word,-w", trace_args.word, "Lexicon word used as the query");
    trace_cmd->add_option("--query,-q", trace_args.query_path, "JSON array holding the query embedding");
    trace_cmd->add_option("--content", trace_args.content, "Content prompt")->capture_default_str();
    auto* steps_opt = trace_cmd->add_option("--steps", steps, "Denoising steps");
    auto* rs_opt = trace_cmd->add_option("--ramp-start", ramp_start, "Start of the blending ramp");
    auto* re_opt = trace_cmd->add_option("--ramp-end", ramp_end, "End of the blending ramp");
    trace_cmd->add_flag("--renormalize", trace_args.renormalize, "Renormalize reweighted attention rows");

    // stats
    auto* stats = app.add_subcommand("stats", "Agreement and rank statistics");
    stats->require_subcommand(1);
    std::string kappa_csv, friedman_csv;
    stats->add_subcommand("kappa", "Pairwise Cohen's kappa of an annotation CSV")
        ->add_option("csv", kappa_csv, "Annotation CSV")
        ->required();
    stats->add_subcommand("friedman", "Friedman test of a rating CSV")
        ->add_option("csv", friedman_csv, "Rating CSV")
        ->required();

    // lexicon
    auto* lexicon_cmd = app.add_subcommand("lexicon", "Emit the bundled emotion lexicon");
    std::string lexicon_out;
    std::size_t lexicon_dim = 32;
    std::uint64_t lexicon_seed = Lexicon::kDefaultSeed;
    lexicon_cmd->add_option("--out,-o", lexicon_out, "Output path (default: standard output)");
    lexicon_cmd->add_option("--dim", lexicon_dim, "Embedding dimension")->capture_default_str();
    lexicon_cmd->add_option("--lexicon-seed", lexicon_seed, "Basis seed")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        Context ctx{out, err, config_path.empty() ? RunConfig{} : load_run_config(config_path), std::nullopt};
        if (seed_opt->count() > 0) ctx.seed_flag = seed_value;
        apply_seed_precedence(ctx);
        if (epochs_opt->count() > 0) ctx.cfg.train.epochs = epochs;
        if (threads_opt->count() > 0) ctx.cfg.train.threads = threads;
        ctx.cfg.validate();

        if (synth->parsed()) return cmd_synth(ctx, synth_out.empty() ? ctx.cfg.paths.dataset : synth_out);
        if (train_cmd->parsed()) {
            if (train_paths.dataset.empty()) train_paths.dataset = ctx.cfg.paths.dataset;
            if (train_paths.checkpoint.empty()) train_paths.checkpoint = ctx.cfg.paths.checkpoint;
            if (train_paths.report.empty()) train_paths.report = ctx.cfg.paths.report;
            return cmd_train(ctx, train_paths);
        }
        if (guide->parsed()) {
            if (k_opt->count() > 0) guide_args.k = k;
            if (k_neg_opt->count() > 0) guide_args.k_neg = k_neg;
            if (tau_opt->count() > 0) guide_args.tau = tau;
            return cmd_guide(ctx, guide_args);
        }
        if (refine_cmd->parsed()) {
            if (iters_opt->count() > 0) refine_args.max_iters = max_iters;
            if (eps_opt->count() > 0) refine_args.eps = eps;
            return cmd_refine(ctx, refine_args);
        }
        if (trace_cmd->parsed()) {
            if (steps_opt->count() > 0) trace_args.steps = steps;
            if (rs_opt->count() > 0) trace_args.ramp_start = ramp_start;
            if (re_opt->count() > 0) trace_args.ramp_end = ramp_end;
            return cmd_trace(ctx, trace_args);
        }
        if (stats->parsed()) {
            const bool kappa = !kappa_csv.empty();
            return cmd_stats(ctx, kappa ? "kappa" : "friedman", kappa ? kappa_csv : friedman_csv);
        }
        if (lexicon_cmd->parsed()) return cmd_lexicon(ctx, lexicon_out, lexicon_dim, lexicon_seed);
        err << "no command given\n";
        return kConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

}  // namespace emospace::cli
