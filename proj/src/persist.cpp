#include "gatenet/persist.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gatenet {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'N', 'C', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(in[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

struct NamedTensor
{
    std::string name;
    const TensorF* tensor;
    bool rank1;
};

Json taxonomy_json(const Taxonomy& taxonomy)
{
    Json categories = Json::array();
    for (std::size_t c = 0; c < taxonomy.categories.size(); ++c)
        categories.push_back({{"name", taxonomy.categories[c]}, {"classes", taxonomy.classes_in(c)}});
    return categories;
}

Json manifest_json(std::span<const NamedTensor> tensors)
{
    Json manifest = Json::array();
    std::size_t offset = 0;
    for (const auto& t : tensors) {
        const std::size_t length = static_cast<std::size_t>(t.tensor->size()) * sizeof(float);
        Json shape = t.rank1 ? Json::array({t.tensor->cols()}) : Json::array({t.tensor->rows(), t.tensor->cols()});
        manifest.push_back({{"name", t.name}, {"shape", shape}, {"offset", offset}, {"length", length}});
        offset += length;
    }
    return manifest;
}

std::vector<std::uint8_t> assemble(const Json& header, std::span<const NamedTensor> tensors)
{
    const std::string text = header.dump();
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    std::vector<const TensorF*> refs;
    for (const auto& t : tensors)
        refs.push_back(t.tensor);
    const auto payload = tensor_payload(refs);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

std::vector<NamedTensor> base_tensors(const BaseParams<float>& params)
{
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto prefix = "dense" + std::to_string(l + 1);
        out.push_back({prefix + ".weight", &params.layers[l].weight, false});
        out.push_back({prefix + ".bias", &params.layers[l].bias, true});
    }
    return out;
}

std::vector<NamedTensor> gate_tensors(const GateSet& gates)
{
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < gates.biases.size(); ++l)
        out.push_back({"gate" + std::to_string(l + 1) + ".bias", &gates.biases[l], true});
    return out;
}

Json common_header(const char* kind, const std::vector<Eigen::Index>& layer_sizes, const Taxonomy& taxonomy)
{
    Json header;
    header["format_version"] = kCheckpointFormatVersion;
    header["kind"] = kind;
    header["layer_sizes"] = layer_sizes;
    header["class_names"] = taxonomy.class_names;
    header["categories"] = taxonomy_json(taxonomy);
    return header;
}

[[noreturn]] void corrupt(const std::string& what)
{
    throw CheckpointError(CheckpointError::Kind::Corrupt, "corrupt checkpoint: " + what);
}

struct Parsed
{
    Json header;
    std::span<const std::uint8_t> payload;
    std::vector<Eigen::Index> layer_sizes;
    Taxonomy taxonomy;
};

Parsed parse(std::span<const std::uint8_t> bytes, const std::string& expected_kind)
{
    if (bytes.size() < 8 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw CheckpointError(CheckpointError::Kind::NotACheckpoint, "not a checkpoint file (bad magic)");
    const std::uint32_t header_len = get_u32(bytes.subspan(4, 4));
    if (header_len > bytes.size() - 8)
        corrupt("header length " + std::to_string(header_len) + " exceeds file size");
    const auto header_bytes = bytes.subspan(8, header_len);

    Parsed parsed;
    try {
        parsed.header = Json::parse(header_bytes.begin(), header_bytes.end());
    } catch (const Json::exception& e) {
        corrupt(std::string("header is not valid JSON: ") + e.what());
    }
    parsed.payload = bytes.subspan(8 + header_len);
    const auto& h = parsed.header;
    try {
        const int version = h.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion)
            throw CheckpointError(CheckpointError::Kind::UnsupportedVersion,
                                  "unsupported checkpoint format version " + std::to_string(version));
        const auto kind = h.at("kind").get<std::string>();
        if (kind != expected_kind)
            throw CheckpointError(CheckpointError::Kind::KindMismatch,
                                  "expected a " + expected_kind + " checkpoint, found kind '" + kind + "'");
        parsed.layer_sizes = h.at("layer_sizes").get<std::vector<Eigen::Index>>();
        parsed.taxonomy.class_names = h.at("class_names").get<std::vector<std::string>>();
        parsed.taxonomy.category_of.assign(parsed.taxonomy.class_names.size(), SIZE_MAX);
        for (const auto& c : h.at("categories")) {
            parsed.taxonomy.categories.push_back(c.at("name").get<std::string>());
            for (const int k : c.at("classes").get<std::vector<int>>()) {
                if (k < 0 || static_cast<std::size_t>(k) >= parsed.taxonomy.class_names.size())
                    corrupt("category lists unknown class " + std::to_string(k));
                parsed.taxonomy.category_of[static_cast<std::size_t>(k)] = parsed.taxonomy.categories.size() - 1;
            }
        }
    } catch (const Json::exception& e) {
        corrupt(std::string("malformed header: ") + e.what());
    }
    try {
        parsed.taxonomy.validate();
    } catch (const ArgumentError& e) {
        corrupt(e.what());
    }
    if (parsed.layer_sizes.size() < 2)
        corrupt("layer_sizes must list at least input and output widths");
    for (const auto n : parsed.layer_sizes)
        if (n < 1)
            corrupt("layer sizes must be positive");
    return parsed;
}

struct ExpectedTensor
{
    std::string name;
    Eigen::Index rows;
    Eigen::Index cols;
    bool rank1;
};

/// Checks the manifest against the expected tensors and decodes the payload.
std::vector<TensorF> read_tensors(const Parsed& parsed, std::span<const ExpectedTensor> expected)
{
    std::vector<TensorF> out;
    try {
        const auto& manifest = parsed.header.at("tensors");
        if (manifest.size() != expected.size())
            corrupt("manifest lists " + std::to_string(manifest.size()) + " tensors, expected " +
                    std::to_string(expected.size()));
        std::size_t offset = 0;
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const auto& entry = manifest[i];
            const auto& want = expected[i];
            const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
            const std::vector<Eigen::Index> want_shape =
                want.rank1 ? std::vector<Eigen::Index>{want.cols} : std::vector<Eigen::Index>{want.rows, want.cols};
            if (entry.at("name").get<std::string>() != want.name || shape != want_shape)
                corrupt("manifest entry " + std::to_string(i) + " does not match expected tensor " + want.name);
            const std::size_t length = static_cast<std::size_t>(want.rows * want.cols) * sizeof(float);
            if (entry.at("offset").get<std::size_t>() != offset || entry.at("length").get<std::size_t>() != length)
                corrupt("manifest offsets of " + want.name + " do not tile the payload");
            if (offset + length > parsed.payload.size())
                corrupt("payload truncated inside " + want.name);
            TensorF t(want.rows, want.cols);
            for (Eigen::Index k = 0; k < t.size(); ++k)
                t.data()[k] = std::bit_cast<float>(
                    get_u32(parsed.payload.subspan(offset + static_cast<std::size_t>(k) * sizeof(float))));
            out.push_back(std::move(t));
            offset += length;
        }
        if (offset != parsed.payload.size())
            corrupt("payload has " + std::to_string(parsed.payload.size() - offset) + " trailing bytes");
    } catch (const Json::exception& e) {
        corrupt(std::string("malformed tensor manifest: ") + e.what());
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> tensor_payload(std::span<const TensorF* const> tensors)
{
    std::vector<std::uint8_t> out;
    for (const auto* t : tensors)
        for (Eigen::Index k = 0; k < t->size(); ++k)
            put_u32(out, std::bit_cast<std::uint32_t>(t->data()[k]));
    return out;
}

std::uint64_t base_digest(const BaseParams<float>& params)
{
    const auto refs = params.tensors();
    return fnv1a64(tensor_payload(refs));
}

std::string digest_hex(std::uint64_t digest)
{
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << digest;
    return s.str();
}

std::vector<std::uint8_t> save_base(const BaseModel& model)
{
    const auto tensors = base_tensors(model.params);
    Json header = common_header("base", model.params.layer_sizes(), model.taxonomy);
    header["norm_stats"] = {{"mean", model.stats.mean}, {"std", model.stats.std}};
    header["tensors"] = manifest_json(tensors);
    return assemble(header, tensors);
}

BaseModel load_base(std::span<const std::uint8_t> bytes)
{
    const auto parsed = parse(bytes, "base");
    BaseModel model;
    model.taxonomy = parsed.taxonomy;
    try {
        model.stats.mean = parsed.header.at("norm_stats").at("mean").get<float>();
        model.stats.std = parsed.header.at("norm_stats").at("std").get<float>();
    } catch (const Json::exception& e) {
        corrupt(std::string("malformed norm_stats: ") + e.what());
    }
    const auto& sizes = parsed.layer_sizes;
    std::vector<ExpectedTensor> expected;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto prefix = "dense" + std::to_string(l + 1);
        expected.push_back({prefix + ".weight", sizes[l], sizes[l + 1], false});
        expected.push_back({prefix + ".bias", 1, sizes[l + 1], true});
    }
    auto tensors = read_tensors(parsed, expected);
    for (std::size_t i = 0; i < tensors.size(); i += 2)
        model.params.layers.push_back({std::move(tensors[i]), std::move(tensors[i + 1])});
    return model;
}

std::vector<std::uint8_t> save_gates(const GateSet& gates, const BaseModel& base)
{
    const auto tensors = gate_tensors(gates);
    Json header = common_header("gates", base.params.layer_sizes(), base.taxonomy);
    header["task"] = gates.task;
    header["base_digest"] = digest_hex(gates.base_digest);
    header["tensors"] = manifest_json(tensors);
    return assemble(header, tensors);
}

GateCheckpoint load_gates(std::span<const std::uint8_t> bytes)
{
    const auto parsed = parse(bytes, "gates");
    GateCheckpoint checkpoint;
    checkpoint.layer_sizes = parsed.layer_sizes;
    checkpoint.taxonomy = parsed.taxonomy;
    try {
        checkpoint.gates.task = parsed.header.at("task").get<std::string>();
        const auto hex = parsed.header.at("base_digest").get<std::string>();
        if (hex.size() != 16 || hex.find_first_not_of("0123456789abcdef") != std::string::npos)
            corrupt("base_digest must be 16 lowercase hex digits");
        checkpoint.gates.base_digest = std::stoull(hex, nullptr, 16);
    } catch (const Json::exception& e) {
        corrupt(std::string("malformed gate header: ") + e.what());
    }
    std::vector<ExpectedTensor> expected;
    for (std::size_t l = 1; l + 1 < parsed.layer_sizes.size(); ++l)
        expected.push_back({"gate" + std::to_string(l) + ".bias", 1, parsed.layer_sizes[l], true});
    checkpoint.gates.biases = read_tensors(parsed, expected);
    return checkpoint;
}

GateBank<float> pair_gates(const BaseModel& base, std::span<const GateCheckpoint> checkpoints)
{
    const auto digest = base_digest(base.params);
    const auto sizes = base.params.layer_sizes();
    std::vector<const GateCheckpoint*> by_category(base.taxonomy.num_categories(), nullptr);
    for (const auto& c : checkpoints) {
        if (c.gates.base_digest != digest)
            throw CheckpointError(CheckpointError::Kind::IncompatibleBase,
                                  "gates for '" + c.gates.task + "' were trained on base " +
                                      digest_hex(c.gates.base_digest) + ", not on this base (" + digest_hex(digest) +
                                      ")");
        if (c.layer_sizes != sizes)
            throw CompatibilityError("gates for '" + c.gates.task + "' do not match the base layer sizes");
        const auto index = base.taxonomy.category_index(c.gates.task);
        if (by_category[index] != nullptr)
            throw ArgumentError("two gate checkpoints for category '" + c.gates.task + "'");
        by_category[index] = &c;
    }
    GateBank<float> bank;
    for (std::size_t i = 0; i < by_category.size(); ++i) {
        if (by_category[i] == nullptr)
            continue;
        bank.tasks.push_back(by_category[i]->gates.task);
        bank.biases.push_back(by_category[i]->gates.biases);
    }
    return bank;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw CheckpointError(CheckpointError::Kind::Io, "failed writing " + path.string());
}

}  // namespace gatenet
