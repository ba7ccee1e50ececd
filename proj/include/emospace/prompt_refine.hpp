#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emospace/core.hpp"

namespace emospace {

struct Candidate {
    std::string emotion;
    std::string refined_prompt;

    bool operator==(const Candidate&) const = default;
};

// Proposes candidate emotion words and rewritten prompts.
class CandidateGenerator {
public:
    virtual ~CandidateGenerator() = default;
    virtual std::vector<Candidate> propose(const std::string& prompt, const std::string& context) = 0;
};

// Maps text to a nonzero vector in the prototype space; same text, same vector.
class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual Vec embed(const std::string& text) = 0;
};

struct LexiconEntry {
    std::string word;
    std::string category;   // one of the eight basic emotions
    std::string gradation;  // "low", "mid", "high" or "composite"
    std::vector<std::string> parents;  // composite words only
    Vec embedding;

    bool operator==(const LexiconEntry&) const = default;
};

// 32 emotion words: eight basic emotions with three intensities each, plus
// eight primary dyads of the emotion wheel.
class Lexicon {
public:
    static constexpr int kVersion = 1;
    static constexpr std::uint64_t kDefaultSeed = 20240601;

    Lexicon() = default;
    Lexicon(std::size_t dim, std::vector<LexiconEntry> entries);

    std::size_t dim() const noexcept { return dim_; }
    const std::vector<LexiconEntry>& entries() const noexcept { return entries_; }
    const LexiconEntry* find(const std::string& word) const;
    // Throws IndexOutOfRange listing the available words.
    const LexiconEntry& at(const std::string& word) const;
    std::vector<std::string> words() const;
    // The three intensities of a basic emotion, low to high.
    std::vector<std::string> gradations(const std::string& category) const;
    // Lexicon word for a token, following inflection aliases ("angry" -> "anger").
    std::optional<std::string> resolve(const std::string& token) const;

    bool operator==(const Lexicon& other) const { return dim_ == other.dim_ && entries_ == other.entries_; }

private:
    std::size_t dim_ = 0;
    std::vector<LexiconEntry> entries_;
    std::map<std::string, std::size_t> index_;
};

// Anchors on distinct rows of a seeded orthogonal basis; low and high words
// mix their anchor with a private basis row (0.6/0.8 and 0.8/0.6); composites
// are normalized midpoints of their parents. Values pass through f32 so the
// result matches the bundled file exactly. Needs dim >= 24.
Lexicon build_default_lexicon(std::size_t dim = 32, std::uint64_t seed = Lexicon::kDefaultSeed);

// JSON: {"version", "dim", "words": {word: {category, gradation, parents,
// embedding: base64 of little-endian f32}}}.
nlohmann::json lexicon_to_json(const Lexicon& lexicon);
Lexicon lexicon_from_json(const nlohmann::json& doc);
Lexicon load_lexicon(const std::filesystem::path& path);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

std::vector<std::string> tokenize(const std::string& text);

// Normalized sum of the distinct lexicon words found in the text. Text with no
// emotion words maps to a fixed pseudo-random direction derived from its hash.
class LexiconEmbedder : public TextEmbedder {
public:
    explicit LexiconEmbedder(const Lexicon& lexicon) : lexicon_(lexicon) {}
    Vec embed(const std::string& text) override;

private:
    const Lexicon& lexicon_;
};

// Proposes the three intensities of every emotion family mentioned in the
// prompt or context, appending each word to the prompt unless already present.
class LexiconGenerator : public CandidateGenerator {
public:
    explicit LexiconGenerator(const Lexicon& lexicon) : lexicon_(lexicon) {}
    std::vector<Candidate> propose(const std::string& prompt, const std::string& context) override;

private:
    const Lexicon& lexicon_;
};

// Candidate generator backed by an HTTP completion service. POSTs
// {"prompt", "context"} and expects [{"emotion", "refined_prompt"}, ...].
// The bearer token is read from EMOSPACE_ORACLE_TOKEN when set.
class HttpCandidateGenerator : public CandidateGenerator {
public:
    static constexpr const char* kTokenVariable = "EMOSPACE_ORACLE_TOKEN";

    explicit HttpCandidateGenerator(std::string url, std::chrono::seconds timeout = std::chrono::seconds(30));
    std::vector<Candidate> propose(const std::string& prompt, const std::string& context) override;

private:
    std::string base_;
    std::string path_;
    std::chrono::seconds timeout_;
};

nlohmann::json candidate_request(const std::string& prompt, const std::string& context);
// Throws OracleError on malformed bodies.
std::vector<Candidate> parse_candidate_response(const std::string& body);

struct DominantEmotion {
    std::string emotion;
    double similarity = 0.0;
};

// argmax of cos(embed(c), p_emo); ties go to the lexicographically smallest word.
DominantEmotion select_dominant(const std::vector<std::string>& candidates, std::span<const double> p_emo,
                                TextEmbedder& embedder);

enum class StopReason { Converged, NoImprovement, NoCandidates, MaxIterations };
std::string_view to_string(StopReason reason);

struct RefinementStep {
    std::size_t iteration = 0;
    std::string prompt;
    std::string dominant;
    double dominant_similarity = 0.0;
    double similarity = 0.0;  // cos(embed(prompt), p_emo)
};

struct RefinementTrace {
    std::string initial_prompt;
    double initial_similarity = 0.0;
    std::vector<RefinementStep> iterations;  // accepted iterations only
    std::size_t rounds = 0;                  // oracle rounds used
    bool converged = false;
    StopReason stop_reason = StopReason::MaxIterations;

    const std::string& final_prompt() const {
        return iterations.empty() ? initial_prompt : iterations.back().prompt;
    }
};

nlohmann::json to_json(const RefinementTrace& trace);

inline constexpr double kDefaultConvergenceEps = 1e-3;

// Keep-best hill climbing on cos(embed(prompt), p_emo).
RefinementTrace refine(const std::string& initial_prompt, std::span<const double> p_emo, CandidateGenerator& gen,
                       TextEmbedder& embedder, std::size_t max_iters, double eps_conv = kDefaultConvergenceEps);

}  // namespace emospace
