#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "emospace/dataset.hpp"
#include "emospace/fusion_net.hpp"
#include "emospace/guidance.hpp"
#include "emospace/latent_mapper.hpp"
#include "emospace/prototype_bank.hpp"

namespace emospace {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr char kContainerMagic[9] = "EMOSPC01";

struct SynthConfig {
    std::size_t dim = 32;
    std::size_t categories = 8;
    std::size_t subclusters_per_category = 2;
    std::size_t samples_per_subcluster = 50;
    double visual_noise = 0.05;
    double text_noise = 0.05;
    double cross_modal_correlation = 0.5;
    std::uint64_t seed = 42;

    // Throws ConfigError. Returns false (a warning, not an error) when
    // categories * subclusters exceeds the dimension.
    bool validate() const;
};

// Orthonormal category anchors; subcluster centers pulled 0.3 toward a random
// direction orthogonal to the anchor; unit-norm samples around each center.
EmbeddingDataset generate_synthetic(const SynthConfig& cfg);

// Binary container: magic, u32 LE manifest length, UTF-8 JSON manifest,
// then little-endian f32/u32 payload. Everything is self-describing.
void save_dataset(const EmbeddingDataset& data, const std::filesystem::path& path);
std::string encode_dataset(const EmbeddingDataset& data);
// Accepts the binary container or JSON lines
// ({"visual": [...], "textual": [...], "label": n, "name": "..."} per line).
EmbeddingDataset load_dataset(const std::filesystem::path& path);
EmbeddingDataset decode_dataset(const std::string& bytes);

struct Checkpoint {
    FusionNet net;
    PrototypeBank bank;
    GuidanceConfig guidance;
    std::optional<Mapper> mapper;
    std::uint64_t seed = 0;
    // Free-form configuration echo written into the manifest.
    nlohmann::json config_echo = nlohmann::json::object();

    bool operator==(const Checkpoint&) const = default;
};

// Rounds every parameter to f32, which is exactly what a save/load cycle does.
Checkpoint quantize_to_f32(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
std::string encode_checkpoint(const Checkpoint& ckpt);
// Validates shapes and the unit-norm prototype invariant (to f32 precision);
// violations raise InvariantViolation.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint decode_checkpoint(const std::string& bytes);

// Manifest of any container file, without decoding the payload.
nlohmann::json read_manifest(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace emospace
