#pragma once

#include <cstring>
#include <filesystem>

#include "xemap/map.hpp"
#include "xemap/png_io.hpp"
#include "xemap/xten.hpp"

namespace xemap {

/// Load a stored correlation map. Accepts single-channel 8-bit PNG (decoded
/// as v/255), XTEN u8 of shape (H, W) (same decoding), and XTEN f32 of shape
/// (H, W) with finite nonnegative values.
inline CorrelationMap load_correlation_map(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "XTEN", 4) == 0) {
        AnyTensor t = read_tensor(bytes);
        if (std::holds_alternative<TensorU8>(t))
            return dequantize_u8(std::get<TensorU8>(t));
        CorrelationMap m = map_from_tensor(std::get<TensorF32>(t));
        for (float v : m.values)
            if (v < 0.0f)
                throw OutOfRange(path.string() + ": map values must be nonnegative");
        return m;
    }

    PngImage img = read_png(path);
    if (img.channels != 1)
        throw SchemaError(path.string() + ": correlation maps must be single-channel");
    CorrelationMap m(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        m.values[i] = float(img.pixels[i]) / 255.0f;
    return m;
}

inline void save_map_xten_f32(const std::filesystem::path& path, const CorrelationMap& m) {
    auto bytes = write_tensor(map_to_tensor(m));
    write_file_bytes(path, bytes);
}

inline void save_map_xten_u8(const std::filesystem::path& path, const TensorU8& t) {
    auto bytes = write_tensor(t);
    write_file_bytes(path, bytes);
}

inline void save_map_png(const std::filesystem::path& path, const TensorU8& t) {
    if (t.shape.size() != 2)
        throw DimensionMismatch("stored map tensor must be 2-D (H, W)");
    write_png_gray(path, int(t.shape[1]), int(t.shape[0]),
                   std::vector<std::uint8_t>(t.data));
}

} // namespace xemap
