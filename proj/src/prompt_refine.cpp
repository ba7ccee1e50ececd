#include "emospace/prompt_refine.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>
#include <openssl/evp.h>

namespace emospace {

namespace {

struct Family {
    const char* category;
    std::array<const char*, 3> words;  // low, mid, high
};

constexpr std::array<Family, 8> kFamilies{{
    {"joy", {"serenity", "joy", "ecstasy"}},
    {"trust", {"acceptance", "trust", "admiration"}},
    {"fear", {"apprehension", "fear", "terror"}},
    {"surprise", {"distraction", "surprise", "amazement"}},
    {"sadness", {"pensiveness", "sadness", "grief"}},
    {"disgust", {"boredom", "disgust", "loathing"}},
    {"anger", {"annoyance", "anger", "rage"}},
    {"anticipation", {"interest", "anticipation", "vigilance"}},
}};

struct Dyad {
    const char* word;
    const char* first;
    const char* second;
};

constexpr std::array<Dyad, 8> kDyads{{
    {"love", "joy", "trust"},
    {"submission", "trust", "fear"},
    {"awe", "fear", "surprise"},
    {"disapproval", "surprise", "sadness"},
    {"remorse", "sadness", "disgust"},
    {"contempt", "disgust", "anger"},
    {"aggressiveness", "anger", "anticipation"},
    {"optimism", "anticipation", "joy"},
}};

const std::map<std::string, std::string>& aliases() {
    static const std::map<std::string, std::string> table{
        {"angry", "anger"},        {"furious", "rage"},          {"enraged", "rage"},
        {"annoyed", "annoyance"},  {"irritated", "annoyance"},   {"happy", "joy"},
        {"joyful", "joy"},         {"ecstatic", "ecstasy"},      {"serene", "serenity"},
        {"calm", "serenity"},      {"sad", "sadness"},           {"grieving", "grief"},
        {"pensive", "pensiveness"}, {"afraid", "fear"},          {"scared", "fear"},
        {"fearful", "fear"},       {"terrified", "terror"},      {"apprehensive", "apprehension"},
        {"surprised", "surprise"}, {"amazed", "amazement"},      {"distracted", "distraction"},
        {"disgusted", "disgust"},  {"bored", "boredom"},         {"trusting", "trust"},
        {"accepting", "acceptance"}, {"admiring", "admiration"}, {"interested", "interest"},
        {"vigilant", "vigilance"}, {"loving", "love"},           {"optimistic", "optimism"},
        {"remorseful", "remorse"}, {"contemptuous", "contempt"}, {"aggressive", "aggressiveness"},
        {"submissive", "submission"}, {"awed", "awe"},           {"disapproving", "disapproval"},
    };
    return table;
}

Vec through_f32(Vec v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
    return v;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string encode_f32(const Vec& v) {
    std::string bytes;
    bytes.reserve(v.size() * 4);
    for (double x : v) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
        for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
    return base64_encode(bytes);
}

Vec decode_f32(const std::string& text, std::size_t dim, const std::string& word) {
    const std::string bytes = base64_decode(text);
    if (bytes.size() != dim * 4) {
        fail(ErrorCode::FormatError, "lexicon word '" + word + "' has " + std::to_string(bytes.size()) +
                                         " embedding bytes, expected " + std::to_string(dim * 4));
    }
    Vec out(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
}

}  // namespace

Lexicon::Lexicon(std::size_t dim, std::vector<LexiconEntry> entries) : dim_(dim), entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.embedding.size() != dim_) {
            fail(ErrorCode::DimMismatch, "lexicon word '" + e.word + "' has the wrong embedding dimension");
        }
        if (std::abs(norm(e.embedding) - 1.0) > 1e-6) {
            fail(ErrorCode::InvariantViolation, "lexicon word '" + e.word + "' is not unit-norm");
        }
        if (!index_.emplace(e.word, i).second) fail(ErrorCode::FormatError, "duplicate lexicon word '" + e.word + "'");
    }
}

const LexiconEntry* Lexicon::find(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

const LexiconEntry& Lexicon::at(const std::string& word) const {
    if (const auto* e = find(word)) return *e;
    std::string list;
    for (const auto& w : words()) list += (list.empty() ? "" : ", ") + w;
    fail(ErrorCode::IndexOutOfRange, "unknown lexicon word '" + word + "'; available: " + list);
}

std::vector<std::string> Lexicon::words() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.word);
    return out;
}

std::vector<std::string> Lexicon::gradations(const std::string& category) const {
    std::vector<std::string> out;
    for (const char* level : {"low", "mid", "high"}) {
        for (const auto& e : entries_)
            if (e.category == category && e.gradation == level) out.push_back(e.word);
    }
    return out;
}

std::optional<std::string> Lexicon::resolve(const std::string& token) const {
    if (find(token)) return token;
    auto it = aliases().find(token);
    if (it != aliases().end() && find(it->second)) return it->second;
    return std::nullopt;
}

Lexicon build_default_lexicon(std::size_t dim, std::uint64_t seed) {
    if (dim < 24) fail(ErrorCode::InvalidArgument, "the default lexicon needs at least 24 dimensions");
    Rng rng(seed);
    const Mat basis = orthogonal_init(24, dim, rng);
    std::vector<LexiconEntry> entries;
    std::map<std::string, Vec> anchors;
    for (std::size_t c = 0; c < kFamilies.size(); ++c) {
        const auto& fam = kFamilies[c];
        auto anchor = basis.row(c);
        auto low_floor = basis.row(8 + 2 * c);
        auto high_floor = basis.row(9 + 2 * c);
        Vec low(dim), mid(anchor.begin(), anchor.end()), high(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            low[i] = 0.6 * anchor[i] + 0.8 * low_floor[i];
            high[i] = 0.8 * anchor[i] + 0.6 * high_floor[i];
        }
        anchors[fam.category] = mid;
        entries.push_back({fam.words[0], fam.category, "low", {}, through_f32(normalized(low))});
        entries.push_back({fam.words[1], fam.category, "mid", {}, through_f32(mid)});
        entries.push_back({fam.words[2], fam.category, "high", {}, through_f32(normalized(high))});
    }
    for (const auto& d : kDyads) {
        Vec mix(dim);
        for (std::size_t i = 0; i < dim; ++i) mix[i] = anchors[d.first][i] + anchors[d.second][i];
        entries.push_back({d.word, d.first, "composite", {d.first, d.second}, through_f32(normalized(mix))});
    }
    return Lexicon(dim, std::move(entries));
}

std::string base64_encode(const std::string& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) fail(ErrorCode::FormatError, "base64 length is not a multiple of 4");
    std::string out(3 * text.size() / 4 + 1, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) fail(ErrorCode::FormatError, "invalid base64 payload");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock keeps the bytes that padding stands for.
    if (!text.empty() && text.back() == '=') --len;
    if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

nlohmann::json lexicon_to_json(const Lexicon& lexicon) {
    nlohmann::json words = nlohmann::json::object();
    for (const auto& e : lexicon.entries()) {
        words[e.word] = {{"category", e.category},
                         {"gradation", e.gradation},
                         {"parents", e.parents},
                         {"embedding", encode_f32(e.embedding)}};
    }
    return {{"version", Lexicon::kVersion}, {"dim", lexicon.dim()}, {"words", words}};
}

Lexicon lexicon_from_json(const nlohmann::json& doc) {
    try {
        const int version = doc.at("version").get<int>();
        if (version != Lexicon::kVersion) {
            fail(ErrorCode::VersionError, "lexicon version " + std::to_string(version) + " is not supported");
        }
        const auto dim = doc.at("dim").get<std::size_t>();
        std::map<std::string, LexiconEntry> by_word;
        for (const auto& [word, body] : doc.at("words").items()) {
            LexiconEntry e;
            e.word = word;
            e.category = body.at("category").get<std::string>();
            e.gradation = body.at("gradation").get<std::string>();
            e.parents = body.value("parents", std::vector<std::string>{});
            e.embedding = decode_f32(body.at("embedding").get<std::string>(), dim, word);
            by_word.emplace(word, std::move(e));
        }
        // Canonical order: families low/mid/high, then dyads.
        std::vector<LexiconEntry> entries;
        for (const auto& fam : kFamilies)
            for (const char* w : fam.words)
                if (auto it = by_word.find(w); it != by_word.end()) entries.push_back(std::move(it->second)), by_word.erase(it);
        for (const auto& d : kDyads)
            if (auto it = by_word.find(d.word); it != by_word.end()) entries.push_back(std::move(it->second)), by_word.erase(it);
        for (auto& [w, e] : by_word) entries.push_back(std::move(e));
        return Lexicon(dim, std::move(entries));
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::FormatError, std::string("malformed lexicon: ") + ex.what());
    }
}

Lexicon load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open lexicon " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::FormatError, "lexicon " + path.string() + ": " + ex.what());
    }
    return lexicon_from_json(doc);
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalpha(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vec LexiconEmbedder::embed(const std::string& text) {
    std::set<std::string> seen;
    Vec sum(lexicon_.dim(), 0.0);
    for (const auto& token : tokenize(text)) {
        auto word = lexicon_.resolve(token);
        if (!word || !seen.insert(*word).second) continue;
        const auto& e = lexicon_.at(*word).embedding;
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += e[i];
    }
    if (seen.empty() || !(norm(sum) > 1e-12)) {
        Rng rng(fnv1a(text));
        do {
            sum = gaussian_vector(lexicon_.dim(), 1.0, rng);
        } while (!(norm(sum) > 0.0));
    }
    normalize_in_place(sum);
    return sum;
}

std::vector<Candidate> LexiconGenerator::propose(const std::string& prompt, const std::string& context) {
    std::vector<std::string> categories;
    const auto add_category = [&](const std::string& c) {
        if (std::find(categories.begin(), categories.end(), c) == categories.end()) categories.push_back(c);
    };
    std::set<std::string> present;
    std::vector<std::string> tokens = tokenize(prompt);
    for (const auto& t : tokens) present.insert(t);
    for (const auto& t : tokenize(prompt + " " + context)) {
        auto word = lexicon_.resolve(t);
        if (!word) continue;
        const auto& e = lexicon_.at(*word);
        if (e.parents.empty()) {
            add_category(e.category);
        } else {
            for (const auto& p : e.parents) add_category(p);
        }
    }
    std::vector<Candidate> out;
    for (const auto& c : categories) {
        for (const auto& w : lexicon_.gradations(c)) {
            out.push_back({w, present.count(w) ? prompt : prompt + ", " + w});
        }
    }
    return out;
}

HttpCandidateGenerator::HttpCandidateGenerator(std::string url, std::chrono::seconds timeout) : timeout_(timeout) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) fail(ErrorCode::ConfigError, "oracle URL needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    base_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

nlohmann::json candidate_request(const std::string& prompt, const std::string& context) {
    return {{"prompt", prompt}, {"context", context}};
}

std::vector<Candidate> parse_candidate_response(const std::string& body) {
    try {
        const auto doc = nlohmann::json::parse(body);
        if (!doc.is_array()) fail(ErrorCode::OracleError, "candidate response must be a JSON array");
        std::vector<Candidate> out;
        for (const auto& item : doc) {
            out.push_back({item.at("emotion").get<std::string>(), item.at("refined_prompt").get<std::string>()});
        }
        return out;
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::OracleError, std::string("malformed candidate response: ") + ex.what());
    }
}

std::vector<Candidate> HttpCandidateGenerator::propose(const std::string& prompt, const std::string& context) {
    httplib::Client client(base_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (const char* token = std::getenv(kTokenVariable); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(path_, headers, candidate_request(prompt, context).dump(), "application/json");
    if (!res) fail(ErrorCode::OracleError, "candidate service unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) fail(ErrorCode::OracleError, "candidate service returned HTTP " + std::to_string(res->status));
    return parse_candidate_response(res->body);
}

DominantEmotion select_dominant(const std::vector<std::string>& candidates, std::span<const double> p_emo,
                                TextEmbedder& embedder) {
    if (candidates.empty()) fail(ErrorCode::EmptyInput, "no candidate emotions to choose from");
    std::optional<DominantEmotion> best;
    for (const auto& c : candidates) {
        Vec e;
        try {
            e = embedder.embed(c);
        } catch (const std::exception& ex) {
            fail(ErrorCode::OracleError, "embedding candidate '" + c + "' failed: " + ex.what());
        }
        const double s = cosine_sim(e, p_emo);
        if (!best || s > best->similarity || (s == best->similarity && c < best->emotion)) best = DominantEmotion{c, s};
    }
    return *best;
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
        case StopReason::Converged: return "Converged";
        case StopReason::NoImprovement: return "NoImprovement";
        case StopReason::NoCandidates: return "NoCandidates";
        case StopReason::MaxIterations: return "MaxIterations";
    }
    return "Unknown";
}

nlohmann::json to_json(const RefinementTrace& trace) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& s : trace.iterations) {
        iterations.push_back({{"iteration", s.iteration},
                              {"prompt", s.prompt},
                              {"dominant", s.dominant},
                              {"dominant_similarity", s.dominant_similarity},
                              {"similarity", s.similarity}});
    }
    return {{"initial_prompt", trace.initial_prompt},
            {"initial_similarity", trace.initial_similarity},
            {"iterations", iterations},
            {"rounds", trace.rounds},
            {"converged", trace.converged},
            {"stop_reason", std::string(to_string(trace.stop_reason))},
            {"final_prompt", trace.final_prompt()}};
}

namespace {

Vec embed_or_fail(TextEmbedder& embedder, const std::string& text, std::size_t iteration) {
    try {
        return embedder.embed(text);
    } catch (const std::exception& ex) {
        fail(ErrorCode::OracleError,
             "iteration " + std::to_string(iteration) + ": embedding '" + text + "' failed: " + ex.what());
    }
}

}  // namespace

RefinementTrace refine(const std::string& initial_prompt, std::span<const double> p_emo, CandidateGenerator& gen,
                       TextEmbedder& embedder, std::size_t max_iters, double eps_conv) {
    if (max_iters == 0) fail(ErrorCode::InvalidArgument, "max_iters must be at least 1");
    if (!(eps_conv > 0.0)) fail(ErrorCode::InvalidArgument, "eps_conv must be positive");
    if (!(norm(p_emo) > 0.0)) fail(ErrorCode::ZeroVector, "refinement target has zero norm");

    RefinementTrace trace;
    trace.initial_prompt = initial_prompt;
    trace.initial_similarity = cosine_sim(embed_or_fail(embedder, initial_prompt, 0), p_emo);
    std::string prompt = initial_prompt;
    std::string context;
    double current = trace.initial_similarity;

    for (std::size_t iter = 1; iter <= max_iters; ++iter) {
        trace.rounds = iter;
        std::vector<Candidate> proposals;
        try {
            proposals = gen.propose(prompt, context);
        } catch (const Error& ex) {
            if (ex.code() == ErrorCode::OracleError) {
                fail(ErrorCode::OracleError, "iteration " + std::to_string(iter) + ": " + ex.what());
            }
            throw;
        } catch (const std::exception& ex) {
            fail(ErrorCode::OracleError, "iteration " + std::to_string(iter) + ": " + ex.what());
        }
        if (proposals.empty()) {
            trace.stop_reason = StopReason::NoCandidates;
            break;
        }

        std::optional<std::pair<double, std::string>> best;
        std::vector<std::string> emotions;
        for (const auto& c : proposals) {
            emotions.push_back(c.emotion);
            const double s = cosine_sim(embed_or_fail(embedder, c.refined_prompt, iter), p_emo);
            if (!best || s > best->first || (s == best->first && c.refined_prompt < best->second)) {
                best = std::make_pair(s, c.refined_prompt);
            }
        }
        if (!(best->first > current)) {
            trace.stop_reason = StopReason::NoImprovement;
            trace.converged = true;
            break;
        }
        DominantEmotion dominant;
        try {
            dominant = select_dominant(emotions, p_emo, embedder);
        } catch (const Error& ex) {
            fail(ErrorCode::OracleError, "iteration " + std::to_string(iter) + ": " + ex.what());
        }
        const double gain = best->first - current;
        prompt = best->second;
        current = best->first;
        context = dominant.emotion;
        trace.iterations.push_back({iter, prompt, dominant.emotion, dominant.similarity, current});
        if (gain < eps_conv) {
            trace.stop_reason = StopReason::Converged;
            trace.converged = true;
            break;
        }
        trace.stop_reason = StopReason::MaxIterations;
    }
    return trace;
}

}  // namespace emospace
