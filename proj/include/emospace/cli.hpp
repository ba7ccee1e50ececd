#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emospace/data_io.hpp"
#include "emospace/error.hpp"
#include "emospace/guidance.hpp"
#include "emospace/prompt_refine.hpp"
#include "emospace/training.hpp"

namespace emospace::cli {

inline constexpr const char* kSeedVariable = "EMOSPACE_SEED";

enum ExitCode : int { kOk = 0, kConfig = 2, kIo = 3, kDomain = 4, kInternal = 5 };

struct RefineSettings {
    std::size_t max_iters = 5;
    double eps_conv = kDefaultConvergenceEps;
    // Empty means the offline lexicon generator.
    std::string oracle_url;
    std::size_t timeout_seconds = 30;
};

struct Paths {
    std::string dataset = "dataset.bin";
    std::string checkpoint = "checkpoint.bin";
    std::string report;
    std::string lexicon;  // empty: bundled lexicon
};

struct RunConfig {
    SynthConfig synth;
    TrainConfig train;
    double merge_threshold = kDefaultMergeThreshold;
    double split_threshold = kDefaultSplitThreshold;
    LossWeights loss_weights;
    GuidanceConfig guidance;  // Wp is drawn at training time
    std::size_t heads = 8;
    BlendSchedule blend;
    RefineSettings refine;
    Paths paths;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

// Every key optional; unknown keys raise ConfigError naming the key.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

int exit_code(ErrorCode code);

// Entry point of the emospace binary. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace emospace::cli
