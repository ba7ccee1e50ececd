#include "emospace/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace emospace {

void EmbeddingDataset::validate() const {
    const std::size_t n = labels.size();
    if (visual.rows() != n || textual.rows() != n) {
        fail(ErrorCode::InvariantViolation, "dataset has inconsistent row counts");
    }
    if (!names.empty() && names.size() != n) fail(ErrorCode::InvariantViolation, "dataset names do not cover every row");
    require_finite(visual.data(), "visual embeddings");
    require_finite(textual.data(), "textual embeddings");
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= classes) {
            fail(ErrorCode::IndexOutOfRange, "row " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                                                 " but m=" + std::to_string(classes));
        }
    }
}

bool SynthConfig::validate() const {
    if (dim == 0 || categories == 0 || subclusters_per_category == 0 || samples_per_subcluster == 0) {
        fail(ErrorCode::ConfigError, "synthetic dataset sizes must be positive");
    }
    if (categories > dim) fail(ErrorCode::ConfigError, "need categories <= dim for orthonormal anchors");
    if (visual_noise < 0.0 || text_noise < 0.0) fail(ErrorCode::ConfigError, "noise levels must be nonnegative");
    if (!(cross_modal_correlation >= 0.0 && cross_modal_correlation <= 1.0)) {
        fail(ErrorCode::ConfigError, "cross_modal_correlation must lie in [0, 1]");
    }
    return categories * subclusters_per_category <= dim;
}

EmbeddingDataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t d = cfg.dim;
    const Mat anchors = orthogonal_init(cfg.categories, d, rng);

    EmbeddingDataset out;
    out.classes = cfg.categories;
    out.visual = Mat(0, d);
    out.textual = Mat(0, d);
    for (std::size_t c = 0; c < cfg.categories; ++c) {
        auto anchor = anchors.row(c);
        for (std::size_t j = 0; j < cfg.subclusters_per_category; ++j) {
            Vec center(anchor.begin(), anchor.end());
            if (d > 1) {
                Vec offset;
                double on = 0.0;
                do {
                    offset = gaussian_vector(d, 1.0, rng);
                    const double along = dot(offset, anchor);
                    for (std::size_t i = 0; i < d; ++i) offset[i] -= along * anchor[i];
                    on = norm(offset);
                } while (!(on > 1e-12));
                for (std::size_t i = 0; i < d; ++i) center[i] += 0.3 * offset[i] / on;
                normalize_in_place(center);
            }
            // A single subcluster sits on its anchor.
            if (cfg.subclusters_per_category == 1) center.assign(anchor.begin(), anchor.end());
            for (std::size_t s = 0; s < cfg.samples_per_subcluster; ++s) {
                Vec v = center;
                for (double& x : v) x += cfg.visual_noise * rng.normal();
                normalize_in_place(v);
                const double rho = cfg.cross_modal_correlation;
                Vec t = v;
                if (rho != 1.0 || cfg.text_noise != 0.0) {
                    for (std::size_t i = 0; i < d; ++i) t[i] = rho * v[i] + (1.0 - rho) * center[i];
                    for (double& x : t) x += cfg.text_noise * rng.normal();
                    normalize_in_place(t);
                }
                out.visual.append_row(v);
                out.textual.append_row(t);
                out.labels.push_back(c);
            }
        }
    }
    return out;
}

namespace {

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int b = 0; b < 4; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f32s(std::span<const double> values) {
        for (double v : values) f32(v);
    }
    void bytes(std::string_view s) { buf_.append(s); }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            fail(ErrorCode::FormatError, std::string("truncated file: ") + what + " needs " + std::to_string(n) +
                                             " bytes at byte offset " + std::to_string(pos_) + ", only " +
                                             std::to_string(bytes_.size() - pos_) + " remain");
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        pos_ += 4;
        return v;
    }
    double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    void f32s(std::span<double> out, const char* what) {
        need(out.size() * 4, what);
        for (double& x : out) x = f32(what);
    }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

std::string container(const nlohmann::json& manifest, std::string payload) {
    Writer w;
    w.bytes(std::string_view(kContainerMagic, 8));
    const std::string text = manifest.dump();
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.bytes(text);
    w.bytes(payload);
    return w.take();
}

nlohmann::json open_container(Reader& r, const char* expected_kind) {
    const std::string magic = r.bytes(8, "magic");
    if (magic != std::string_view(kContainerMagic, 8)) {
        fail(ErrorCode::FormatError, "bad magic at byte offset 0; not an EMOSPC01 container");
    }
    const std::size_t len_at = r.offset();
    const std::uint32_t len = r.u32("manifest length");
    const std::size_t manifest_at = r.offset();
    const std::string text = r.bytes(len, "manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::FormatError, "manifest at byte offset " + std::to_string(manifest_at) + " (length field at " +
                                         std::to_string(len_at) + ") is not valid JSON: " + ex.what());
    }
    if (!manifest.is_object() || !manifest.contains("format_version")) {
        fail(ErrorCode::FormatError, "manifest at byte offset " + std::to_string(manifest_at) + " lacks format_version");
    }
    const auto version = manifest.at("format_version").get<std::int64_t>();
    if (version != kFormatVersion) {
        fail(ErrorCode::VersionError, "format_version " + std::to_string(version) + " is not supported (expected " +
                                          std::to_string(kFormatVersion) + ")");
    }
    const std::string kind = manifest.value("kind", std::string("dataset"));
    if (kind != expected_kind) {
        fail(ErrorCode::FormatError, std::string("container holds a ") + kind + ", expected a " + expected_kind);
    }
    return manifest;
}

template <typename T>
T field(const nlohmann::json& manifest, const char* key) {
    try {
        return manifest.at(key).get<T>();
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::FormatError, std::string("manifest field '") + key + "': " + ex.what());
    }
}

EmbeddingDataset decode_jsonl(const std::string& text) {
    EmbeddingDataset out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::size_t max_label = 0;
    bool any_names = false;
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto obj = nlohmann::json::parse(line);
            const auto v = obj.at("visual").get<Vec>();
            const auto t = obj.at("textual").get<Vec>();
            const auto label = obj.at("label").get<std::size_t>();
            if (out.labels.empty()) {
                out.visual = Mat(0, v.size());
                out.textual = Mat(0, t.size());
            }
            out.visual.append_row(v);
            out.textual.append_row(t);
            out.labels.push_back(label);
            max_label = std::max(max_label, label);
            if (obj.contains("name")) any_names = true;
            names.push_back(obj.value("name", std::string()));
        } catch (const nlohmann::json::exception& ex) {
            fail(ErrorCode::FormatError, "JSON lines record at line " + std::to_string(line_no) + ": " + ex.what());
        } catch (const Error& ex) {
            fail(ErrorCode::FormatError, "JSON lines record at line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    if (out.labels.empty()) fail(ErrorCode::EmptyDataset, "JSON lines file holds no records");
    out.classes = max_label + 1;
    if (any_names) out.names = std::move(names);
    out.validate();
    return out;
}

}  // namespace

std::string encode_dataset(const EmbeddingDataset& data) {
    data.validate();
    nlohmann::json manifest = {{"format_version", kFormatVersion},
                               {"kind", "dataset"},
                               {"N", data.size()},
                               {"d_v", data.visual_dim()},
                               {"d_t", data.text_dim()},
                               {"m", data.classes},
                               {"has_names", !data.names.empty()}};
    Writer w;
    w.f32s(data.visual.data());
    w.f32s(data.textual.data());
    for (std::size_t label : data.labels) w.u32(static_cast<std::uint32_t>(label));
    for (const auto& name : data.names) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
    }
    return container(manifest, w.take());
}

EmbeddingDataset decode_dataset(const std::string& bytes) {
    if (bytes.size() < 8 || bytes.compare(0, 8, kContainerMagic, 8) != 0) {
        const auto first = bytes.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && bytes[first] == '{') return decode_jsonl(bytes);
    }
    Reader r(bytes);
    const auto manifest = open_container(r, "dataset");
    const auto n = field<std::size_t>(manifest, "N");
    const auto dv = field<std::size_t>(manifest, "d_v");
    const auto dt = field<std::size_t>(manifest, "d_t");
    EmbeddingDataset out;
    out.classes = field<std::size_t>(manifest, "m");
    const bool has_names = field<bool>(manifest, "has_names");
    out.visual = Mat(n, dv);
    out.textual = Mat(n, dt);
    r.f32s(out.visual.data(), "visual matrix");
    r.f32s(out.textual.data(), "textual matrix");
    r.need(4 * n, "labels");
    for (std::size_t i = 0; i < n; ++i) out.labels.push_back(r.u32("labels"));
    if (has_names) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t len = r.u32("name length");
            out.names.push_back(r.bytes(len, "name"));
        }
    }
    if (!r.at_end()) {
        fail(ErrorCode::FormatError, "unexpected trailing bytes at byte offset " + std::to_string(r.offset()));
    }
    out.validate();
    return out;
}

void save_dataset(const EmbeddingDataset& data, const std::filesystem::path& path) {
    write_file(path, encode_dataset(data));
}

EmbeddingDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

namespace {

Mat round_f32(Mat m) {
    for (double& x : m.data()) x = static_cast<double>(static_cast<float>(x));
    return m;
}

Vec round_f32(Vec v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
    return v;
}

struct Block {
    std::string name;
    std::size_t rows;
    std::size_t cols;
};

}  // namespace

Checkpoint quantize_to_f32(const Checkpoint& ckpt) {
    Checkpoint out = ckpt;
    out.net.W1 = round_f32(out.net.W1);
    out.net.W2 = round_f32(out.net.W2);
    out.net.Ug = round_f32(out.net.Ug);
    out.net.wg = round_f32(out.net.wg);
    out.bank.prototypes = round_f32(out.bank.prototypes);
    out.guidance.Wp = round_f32(out.guidance.Wp);
    if (out.mapper) {
        out.mapper->W1 = round_f32(out.mapper->W1);
        out.mapper->b1 = round_f32(out.mapper->b1);
        out.mapper->W2 = round_f32(out.mapper->W2);
        out.mapper->b2 = round_f32(out.mapper->b2);
    }
    return out;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    validate_fusion_net(ckpt.net);
    validate_bank(ckpt.bank, 1e-6);
    ckpt.guidance.validate();
    if (ckpt.bank.dim() != ckpt.net.visual_dim()) {
        fail(ErrorCode::InvariantViolation, "prototype dimension differs from the fused feature dimension");
    }
    if (ckpt.guidance.Wp.cols() != ckpt.bank.dim() || ckpt.guidance.Wp.rows() == 0) {
        fail(ErrorCode::InvariantViolation, "Wp must have one column per prototype dimension");
    }
    if (ckpt.mapper) validate_mapper(*ckpt.mapper);

    std::vector<Block> blocks;
    Writer w;
    const auto put = [&](const std::string& name, std::size_t rows, std::size_t cols, std::span<const double> values) {
        blocks.push_back({name, rows, cols});
        w.f32s(values);
    };
    put("fusion.W1", ckpt.net.W1.rows(), ckpt.net.W1.cols(), ckpt.net.W1.data());
    put("fusion.W2", ckpt.net.W2.rows(), ckpt.net.W2.cols(), ckpt.net.W2.data());
    put("fusion.Ug", ckpt.net.Ug.rows(), ckpt.net.Ug.cols(), ckpt.net.Ug.data());
    put("fusion.wg", 1, ckpt.net.wg.size(), ckpt.net.wg);
    put("bank.prototypes", ckpt.bank.size(), ckpt.bank.dim(), ckpt.bank.prototypes.data());
    put("guidance.Wp", ckpt.guidance.Wp.rows(), ckpt.guidance.Wp.cols(), ckpt.guidance.Wp.data());
    if (ckpt.mapper) {
        const Mapper& m = *ckpt.mapper;
        put("mapper.W1", m.W1.rows(), m.W1.cols(), m.W1.data());
        put("mapper.b1", 1, m.b1.size(), m.b1);
        put("mapper.W2", m.W2.rows(), m.W2.cols(), m.W2.data());
        put("mapper.b2", 1, m.b2.size(), m.b2);
    }
    nlohmann::json block_list = nlohmann::json::array();
    for (const auto& b : blocks) block_list.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});

    const auto& g = ckpt.guidance;
    nlohmann::json manifest = {
        {"format_version", kFormatVersion},
        {"kind", "checkpoint"},
        {"seed", ckpt.seed},
        {"rng", Rng::kAlgorithm},
        {"blocks", block_list},
        {"bank",
         {{"usage", ckpt.bank.usage},
          {"merge_threshold", ckpt.bank.merge_threshold},
          {"split_threshold", ckpt.bank.split_threshold},
          {"generation", ckpt.bank.generation}}},
        {"guidance",
         {{"k_pos", g.k_pos},
          {"k_neg", g.k_neg},
          {"tau_temp", g.tau_temp},
          {"alpha_attn", g.alpha_attn},
          {"renormalize_rows", g.renormalize_rows},
          {"neg_scale", g.neg_scale}}},
        {"has_mapper", ckpt.mapper.has_value()},
        {"config", ckpt.config_echo},
    };
    return container(manifest, w.take());
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    const auto manifest = open_container(r, "checkpoint");
    Checkpoint out;
    out.seed = field<std::uint64_t>(manifest, "seed");
    out.config_echo = manifest.value("config", nlohmann::json::object());

    std::map<std::string, Mat> blocks;
    for (const auto& b : field<nlohmann::json>(manifest, "blocks")) {
        const auto name = field<std::string>(b, "name");
        Mat m(field<std::size_t>(b, "rows"), field<std::size_t>(b, "cols"));
        r.f32s(m.data(), "parameter block");
        blocks[name] = std::move(m);
    }
    if (!r.at_end()) {
        fail(ErrorCode::FormatError, "unexpected trailing bytes at byte offset " + std::to_string(r.offset()));
    }
    const auto take = [&](const std::string& name) -> Mat {
        auto it = blocks.find(name);
        if (it == blocks.end()) fail(ErrorCode::FormatError, "checkpoint lacks block " + name);
        return std::move(it->second);
    };
    const auto take_vec = [&](const std::string& name) -> Vec {
        Mat m = take(name);
        if (m.rows() != 1) fail(ErrorCode::InvariantViolation, "block " + name + " must be a single row");
        return std::move(m.data());
    };

    out.net.W1 = take("fusion.W1");
    out.net.W2 = take("fusion.W2");
    out.net.Ug = take("fusion.Ug");
    out.net.wg = take_vec("fusion.wg");
    out.bank.prototypes = take("bank.prototypes");
    out.guidance.Wp = take("guidance.Wp");

    const auto bank_meta = field<nlohmann::json>(manifest, "bank");
    out.bank.usage = field<std::vector<std::uint64_t>>(bank_meta, "usage");
    out.bank.merge_threshold = field<double>(bank_meta, "merge_threshold");
    out.bank.split_threshold = field<double>(bank_meta, "split_threshold");
    out.bank.generation = field<std::uint64_t>(bank_meta, "generation");

    const auto g = field<nlohmann::json>(manifest, "guidance");
    out.guidance.k_pos = field<std::size_t>(g, "k_pos");
    out.guidance.k_neg = field<std::size_t>(g, "k_neg");
    out.guidance.tau_temp = field<double>(g, "tau_temp");
    out.guidance.alpha_attn = field<double>(g, "alpha_attn");
    out.guidance.renormalize_rows = field<bool>(g, "renormalize_rows");
    out.guidance.neg_scale = field<double>(g, "neg_scale");

    if (field<bool>(manifest, "has_mapper")) {
        Mapper m;
        m.W1 = take("mapper.W1");
        m.b1 = take_vec("mapper.b1");
        m.W2 = take("mapper.W2");
        m.b2 = take_vec("mapper.b2");
        out.mapper = std::move(m);
    }

    try {
        validate_fusion_net(out.net);
        validate_bank(out.bank, 1e-6);
        out.guidance.validate();
        if (out.mapper) validate_mapper(*out.mapper);
    } catch (const Error& ex) {
        fail(ErrorCode::InvariantViolation, std::string("checkpoint rejected: ") + ex.what());
    }
    if (out.bank.dim() != out.net.visual_dim() || out.guidance.Wp.cols() != out.bank.dim()) {
        fail(ErrorCode::InvariantViolation, "checkpoint blocks disagree on the prototype dimension");
    }
    return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

nlohmann::json read_manifest(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    Reader r(bytes);
    r.bytes(8, "magic");
    if (bytes.compare(0, 8, kContainerMagic, 8) != 0) fail(ErrorCode::FormatError, "bad magic at byte offset 0");
    const std::uint32_t len = r.u32("manifest length");
    try {
        return nlohmann::json::parse(r.bytes(len, "manifest"));
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::FormatError, std::string("manifest at byte offset 12 is not valid JSON: ") + ex.what());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace emospace
