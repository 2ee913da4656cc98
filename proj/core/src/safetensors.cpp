#include "rolesteer/safetensors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "rolesteer/error.hpp"

namespace rolesteer {

namespace {

constexpr std::uint64_t kMaxHeaderBytes = 100ull * 1024 * 1024;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint32_t bswap32(std::uint32_t v) {
    return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
}

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void append_f32_le(std::string& out, const std::vector<float>& values) {
    const std::size_t offset = out.size();
    out.resize(offset + values.size() * 4);
    char* dst = out.data() + offset;
    for (float f : values) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
        if constexpr (std::endian::native == std::endian::big) bits = bswap32(bits);
        std::memcpy(dst, &bits, 4);
        dst += 4;
    }
}

}  // namespace

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (auto dim : shape) n *= static_cast<std::size_t>(dim);
    return n;
}

void write_safetensors(const std::filesystem::path& path, const TensorMap& tensors,
                       const std::map<std::string, std::string>& metadata) {
    nlohmann::json header = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [key, tensor] : tensors) {
        if (key == "__metadata__") throw UsageError("safetensors: reserved tensor key '__metadata__'");
        for (auto dim : tensor.shape) {
            if (dim < 0) throw UsageError("safetensors: negative dimension in '" + key + "'");
        }
        if (tensor.numel() != tensor.values.size()) {
            throw UsageError("safetensors: tensor '" + key + "' has " + std::to_string(tensor.values.size()) +
                             " values but its shape implies " + std::to_string(tensor.numel()));
        }
        const std::uint64_t bytes = tensor.values.size() * 4;
        header[key] = {{"dtype", "F32"}, {"shape", tensor.shape}, {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    if (!metadata.empty()) header["__metadata__"] = metadata;

    std::string header_text = header.dump();
    while (header_text.size() % 8 != 0) header_text.push_back(' ');

    std::string blob;
    blob.reserve(8 + header_text.size() + offset);
    put_u64_le(blob, header_text.size());
    blob += header_text;
    for (const auto& [key, tensor] : tensors) append_f32_le(blob, tensor.values);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("safetensors: cannot open '" + path.string() + "' for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw DataError("safetensors: write failed for '" + path.string() + "'");
}

SafetensorsFile read_safetensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("safetensors: cannot open '" + path.string() + "'");
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    const std::string where = "safetensors '" + path.string() + "': ";

    if (blob.size() < 8) throw DataError(where + "truncated (no header length)");
    const std::uint64_t header_len = get_u64_le(bytes);
    if (header_len > kMaxHeaderBytes || header_len > blob.size() - 8) {
        throw DataError(where + "truncated or oversized header (" + std::to_string(header_len) + " bytes)");
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.begin() + 8, blob.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + "header is not valid JSON: " + e.what());
    }
    if (!header.is_object()) throw DataError(where + "header is not a JSON object");

    const std::uint64_t payload_size = blob.size() - 8 - header_len;
    const unsigned char* payload = bytes + 8 + header_len;

    SafetensorsFile file;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (const auto& [key, entry] : header.items()) {
        if (key == "__metadata__") {
            if (!entry.is_object()) throw DataError(where + "__metadata__ is not an object");
            for (const auto& [mk, mv] : entry.items()) {
                if (!mv.is_string()) throw DataError(where + "__metadata__ value '" + mk + "' is not a string");
                file.metadata[mk] = mv.get<std::string>();
            }
            continue;
        }
        if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") ||
            !entry.contains("data_offsets")) {
            throw DataError(where + "tensor '" + key + "' lacks dtype/shape/data_offsets");
        }
        if (entry["dtype"] != "F32") {
            throw DataError(where + "tensor '" + key + "' has dtype " + entry["dtype"].dump() + ", expected F32");
        }
        Tensor tensor;
        try {
            tensor.shape = entry["shape"].get<std::vector<std::int64_t>>();
        } catch (const nlohmann::json::exception&) {
            throw DataError(where + "tensor '" + key + "' has a malformed shape");
        }
        for (auto dim : tensor.shape) {
            if (dim < 0) throw DataError(where + "tensor '" + key + "' has a negative dimension");
        }
        const auto& offsets = entry["data_offsets"];
        if (!offsets.is_array() || offsets.size() != 2 || !offsets[0].is_number_unsigned() ||
            !offsets[1].is_number_unsigned()) {
            throw DataError(where + "tensor '" + key + "' has malformed data_offsets");
        }
        const auto begin = offsets[0].get<std::uint64_t>();
        const auto end = offsets[1].get<std::uint64_t>();
        if (begin > end || end > payload_size) {
            throw DataError(where + "tensor '" + key + "' data_offsets out of range (file truncated?)");
        }
        if (end - begin != tensor.numel() * 4) {
            throw DataError(where + "tensor '" + key + "' byte length disagrees with its shape");
        }
        tensor.values.resize(tensor.numel());
        const unsigned char* src = payload + begin;
        for (std::size_t i = 0; i < tensor.values.size(); ++i, src += 4) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, src, 4);
            if constexpr (std::endian::native == std::endian::big) bits = bswap32(bits);
            tensor.values[i] = std::bit_cast<float>(bits);
        }
        spans.emplace_back(begin, end);
        file.tensors.emplace(key, std::move(tensor));
    }

    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
        if (spans[i].first < spans[i - 1].second) throw DataError(where + "tensor byte ranges overlap");
    }
    return file;
}

const Tensor& require_tensor(const SafetensorsFile& file, const std::string& key, const std::string& context) {
    auto it = file.tensors.find(key);
    if (it == file.tensors.end()) throw DataError(context + ": missing tensor key '" + key + "'");
    return it->second;
}

}  // namespace rolesteer
