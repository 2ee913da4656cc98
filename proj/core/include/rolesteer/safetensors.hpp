#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rolesteer {

// A float32 tensor as stored in a safetensors file.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> values;

    std::size_t numel() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

using TensorMap = std::map<std::string, Tensor>;

struct SafetensorsFile {
    TensorMap tensors;
    std::map<std::string, std::string> metadata;
};

// Writes an F32 safetensors file: 8-byte little-endian header length, a JSON
// header with keys in lexicographic order, then the raw little-endian payload
// laid out in the same key order. The header is space-padded to a multiple of
// 8 bytes. Output bytes are a pure function of the inputs.
void write_safetensors(const std::filesystem::path& path, const TensorMap& tensors,
                       const std::map<std::string, std::string>& metadata = {});

// Reads a safetensors file. Only F32 tensors are accepted. Throws DataError on
// truncation, malformed headers, overlapping or out-of-range offsets.
SafetensorsFile read_safetensors(const std::filesystem::path& path);

// Convenience lookup that throws DataError naming `key` (and `context`) when absent.
const Tensor& require_tensor(const SafetensorsFile& file, const std::string& key,
                             const std::string& context);

}  // namespace rolesteer
