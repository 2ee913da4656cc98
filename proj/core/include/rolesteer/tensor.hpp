#pragma once

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>
#include <cstddef>
#include <span>
#include <vector>

namespace rolesteer {

// Dense row-major float32 matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

    float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool empty() const noexcept { return rows == 0 || cols == 0; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline bool all_finite(std::span<const float> values) {
    for (float v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// The double nearest to the shortest decimal that round-trips `value` as a
// float, so 0.2f serializes as 0.2 rather than 0.20000000298023224.
inline double shortest_double(float value) {
    if (!std::isfinite(value)) return static_cast<double>(value);
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::strtod(std::string(buf, end).c_str(), nullptr);
}

}  // namespace rolesteer
