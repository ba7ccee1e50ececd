#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "emospace/prompt_refine.hpp"

using namespace emospace;

namespace {

const Lexicon& lexicon() {
    static const Lexicon lex = build_default_lexicon();
    return lex;
}

// Returns a fixed list regardless of input.
class FixedGenerator : public CandidateGenerator {
public:
    explicit FixedGenerator(std::vector<Candidate> c) : candidates_(std::move(c)) {}
    std::vector<Candidate> propose(const std::string&, const std::string&) override {
        ++calls;
        return candidates_;
    }
    int calls = 0;

private:
    std::vector<Candidate> candidates_;
};

// Echoes the current prompt back as its only candidate.
class EchoGenerator : public CandidateGenerator {
public:
    std::vector<Candidate> propose(const std::string& prompt, const std::string&) override {
        return {{"anger", prompt}};
    }
};

// Always proposes a strictly better rewrite by appending one more "rage".
class EndlessGenerator : public CandidateGenerator {
public:
    std::vector<Candidate> propose(const std::string& prompt, const std::string&) override {
        ++calls;
        return {{"rage", prompt + " x"}};
    }
    int calls = 0;
};

// Similarity grows with the prompt length, so every rewrite improves.
class LengthEmbedder : public TextEmbedder {
public:
    Vec embed(const std::string& text) override {
        const double n = static_cast<double>(text.size());
        return {1.0, 100.0 / n};
    }
};

class FailingEmbedder : public TextEmbedder {
public:
    Vec embed(const std::string& text) override {
        if (text == "boom") throw std::runtime_error("embedding service down");
        return {1.0, 0.0};
    }
};

class ThrowingGenerator : public CandidateGenerator {
public:
    std::vector<Candidate> propose(const std::string&, const std::string&) override {
        throw std::runtime_error("timeout");
    }
};

}  // namespace

TEST(Lexicon, Contents) {
    const Lexicon& lex = lexicon();
    EXPECT_EQ(lex.dim(), 32u);
    EXPECT_EQ(lex.entries().size(), 32u);
    std::set<std::string> categories;
    std::size_t composites = 0;
    for (const LexiconEntry& e : lex.entries()) {
        EXPECT_NEAR(norm(e.embedding), 1.0, 1e-6) << e.word;
        categories.insert(e.category);
        if (e.gradation == "composite") {
            ++composites;
            ASSERT_EQ(e.parents.size(), 2u);
        }
    }
    EXPECT_EQ(categories.size(), 8u);
    EXPECT_EQ(composites, 8u);
    EXPECT_EQ(lex.gradations("anger"), (std::vector<std::string>{"annoyance", "anger", "rage"}));
    EXPECT_EQ(lex.resolve("angry"), std::optional<std::string>("anger"));
    EXPECT_EQ(lex.resolve("furious"), std::optional<std::string>("rage"));
    EXPECT_FALSE(lex.resolve("scene").has_value());
}

TEST(Lexicon, GeometryOfGradations) {
    const Lexicon& lex = lexicon();
    EXPECT_NEAR(cosine_sim(lex.at("annoyance").embedding, lex.at("anger").embedding), 0.6, 1e-6);
    EXPECT_NEAR(cosine_sim(lex.at("rage").embedding, lex.at("anger").embedding), 0.8, 1e-6);
    EXPECT_NEAR(cosine_sim(lex.at("anger").embedding, lex.at("fear").embedding), 0.0, 1e-6);
    EXPECT_NEAR(cosine_sim(lex.at("love").embedding, lex.at("joy").embedding), 1.0 / std::sqrt(2.0), 1e-6);
    EXPECT_NEAR(cosine_sim(lex.at("love").embedding, lex.at("trust").embedding), 1.0 / std::sqrt(2.0), 1e-6);
}

TEST(Lexicon, UnknownWordListsAvailable) {
    try {
        lexicon().at("blorp");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
        EXPECT_NE(std::string(e.what()).find("serenity"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("optimism"), std::string::npos);
    }
}

TEST(Lexicon, JsonRoundTripAndBundledFile) {
    const Lexicon& lex = lexicon();
    EXPECT_EQ(lexicon_from_json(lexicon_to_json(lex)), lex);
    const Lexicon bundled = load_lexicon(std::string(EMOSPACE_DATA_DIR) + "/lexicon_v1.json");
    EXPECT_EQ(bundled, lex);
}

TEST(Lexicon, RejectsWrongVersion) {
    nlohmann::json doc = lexicon_to_json(lexicon());
    doc["version"] = 2;
    try {
        lexicon_from_json(doc);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::VersionError);
    }
}

TEST(Base64, KnownVectorsAndRoundTrip) {
    EXPECT_EQ(base64_encode(""), "");
    EXPECT_EQ(base64_encode("f"), "Zg==");
    EXPECT_EQ(base64_encode("fo"), "Zm8=");
    EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
    EXPECT_EQ(base64_decode("Zm9vYg=="), "foob");
    std::string bytes;
    for (int i = 0; i < 256; ++i) bytes.push_back(static_cast<char>(i));
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
    try {
        base64_decode("@@@");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::FormatError);
    }
}

TEST(Tokenize, LowercaseWords) {
    EXPECT_EQ(tokenize("An ANGRY scene, rage!"), (std::vector<std::string>{"an", "angry", "scene", "rage"}));
}

TEST(LexiconEmbedder, Behaviour) {
    LexiconEmbedder emb(lexicon());
    EXPECT_NEAR(cosine_sim(emb.embed("rage"), lexicon().at("rage").embedding), 1.0, 1e-12);
    EXPECT_EQ(emb.embed("a quiet landscape"), emb.embed("a quiet landscape"));
    EXPECT_NEAR(norm(emb.embed("a quiet landscape")), 1.0, 1e-12);
    EXPECT_NEAR(cosine_sim(emb.embed("an angry scene"), lexicon().at("rage").embedding), 0.8, 1e-6);
    EXPECT_EQ(emb.embed("rage rage"), emb.embed("rage"));
}

TEST(LexiconGenerator, ProposesFamilyGradations) {
    LexiconGenerator gen(lexicon());
    const std::vector<Candidate> c = gen.propose("an angry scene", "");
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0], (Candidate{"annoyance", "an angry scene, annoyance"}));
    EXPECT_EQ(c[2], (Candidate{"rage", "an angry scene, rage"}));
    EXPECT_TRUE(gen.propose("a quiet landscape", "").empty());
    EXPECT_EQ(gen.propose("a quiet landscape", "rage").size(), 3u);
}

TEST(SelectDominant, Cases) {
    LexiconEmbedder emb(lexicon());
    const Vec rage = lexicon().at("rage").embedding;
    EXPECT_EQ(select_dominant({"serenity"}, rage, emb).emotion, "serenity");
    const DominantEmotion d = select_dominant({"serenity", "rage"}, rage, emb);
    EXPECT_EQ(d.emotion, "rage");
    EXPECT_NEAR(d.similarity, 1.0, 1e-12);
    LengthEmbedder same_length;
    EXPECT_EQ(select_dominant({"zeal", "calm"}, Vec{1.0, 0.5}, same_length).emotion, "calm");
    try {
        select_dominant({}, rage, emb);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
    FailingEmbedder bad;
    try {
        select_dominant({"ok", "boom"}, Vec{1.0, 0.0}, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OracleError);
        EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
    }
}

TEST(Refine, AngrySceneTowardRage) {
    LexiconEmbedder emb(lexicon());
    LexiconGenerator gen(lexicon());
    const Vec target = emb.embed("rage");
    const RefinementTrace t = refine("an angry scene", target, gen, emb, 5);
    ASSERT_GE(t.iterations.size(), 1u);
    EXPECT_LE(t.iterations.size(), 3u);
    EXPECT_TRUE(t.converged);
    EXPECT_EQ(t.iterations.back().dominant, "rage");
    EXPECT_EQ(t.final_prompt(), "an angry scene, rage");
    EXPECT_NEAR(t.initial_similarity, 0.8, 1e-6);
    EXPECT_NEAR(t.iterations[0].similarity, 3.0 / std::sqrt(10.0), 1e-6);
    double prev = t.initial_similarity;
    for (const RefinementStep& s : t.iterations) {
        EXPECT_GT(s.similarity, prev);
        prev = s.similarity;
    }
}

TEST(Refine, SingleIterationBudget) {
    LexiconEmbedder emb(lexicon());
    LexiconGenerator gen(lexicon());
    const RefinementTrace t = refine("an angry scene", emb.embed("rage"), gen, emb, 1);
    EXPECT_LE(t.iterations.size(), 1u);
    EXPECT_EQ(t.rounds, 1u);
}

TEST(Refine, EchoStopsWithoutImprovement) {
    LexiconEmbedder emb(lexicon());
    EchoGenerator gen;
    const RefinementTrace t = refine("an angry scene", emb.embed("rage"), gen, emb, 5);
    EXPECT_TRUE(t.iterations.empty());
    EXPECT_EQ(t.rounds, 1u);
    EXPECT_EQ(t.stop_reason, StopReason::NoImprovement);
}

TEST(Refine, NoCandidates) {
    LexiconEmbedder emb(lexicon());
    FixedGenerator gen({});
    const RefinementTrace t = refine("a quiet landscape", emb.embed("rage"), gen, emb, 5);
    EXPECT_EQ(t.stop_reason, StopReason::NoCandidates);
    EXPECT_FALSE(t.converged);
}

TEST(Refine, NeverExceedsBudget) {
    LengthEmbedder emb;
    for (std::size_t budget : {1u, 2u, 7u}) {
        EndlessGenerator gen;
        const RefinementTrace t = refine("p", Vec{1.0, 0.0}, gen, emb, budget, 1e-12);
        EXPECT_EQ(gen.calls, static_cast<int>(budget));
        EXPECT_EQ(t.iterations.size(), budget);
        EXPECT_EQ(t.stop_reason, StopReason::MaxIterations);
    }
}

TEST(Refine, ConvergesOnSmallGain) {
    LengthEmbedder emb;
    EndlessGenerator gen;
    const RefinementTrace t = refine("a much longer prompt than the others", Vec{1.0, 0.0}, gen, emb, 50, 0.5);
    EXPECT_EQ(t.stop_reason, StopReason::Converged);
    EXPECT_EQ(t.iterations.size(), 1u);
}

TEST(Refine, OracleFailureCarriesIteration) {
    LexiconEmbedder emb(lexicon());
    ThrowingGenerator gen;
    try {
        refine("an angry scene", emb.embed("rage"), gen, emb, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OracleError);
        EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
    }
}

TEST(Refine, Deterministic) {
    LexiconEmbedder emb(lexicon());
    LexiconGenerator gen(lexicon());
    const Vec target = emb.embed("terror");
    EXPECT_EQ(to_json(refine("a fearful night", target, gen, emb, 5)).dump(),
              to_json(refine("a fearful night", target, gen, emb, 5)).dump());
}

TEST(CandidateProtocol, RequestAndResponse) {
    EXPECT_EQ(candidate_request("p", "c").dump(), R"({"context":"c","prompt":"p"})");
    const auto parsed = parse_candidate_response(R"([{"emotion":"awe","refined_prompt":"a vast hall, awe"}])");
    ASSERT_EQ(parsed.size(), 1u);
    EXPECT_EQ(parsed[0], (Candidate{"awe", "a vast hall, awe"}));
    for (const char* bad : {"{}", "[{\"emotion\":1}]", "not json"}) {
        try {
            parse_candidate_response(bad);
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::OracleError);
        }
    }
}
