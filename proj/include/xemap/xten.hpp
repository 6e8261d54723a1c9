#pragma once

// XTEN binary tensor format:
//   bytes 0-3   magic "XTEN"
//   byte  4     dtype: 1 = f32, 2 = u8
//   byte  5     ndim: 0-8
//   next        ndim little-endian u64 extents
//   rest        row-major payload (f32 LE or raw u8), no padding, no checksum

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <variant>
#include <vector>

#include "xemap/tensor.hpp"

namespace xemap {

using AnyTensor = std::variant<TensorF32, TensorU8>;

namespace detail {

inline void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

inline std::uint64_t get_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}

inline void put_f32_le(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t v = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

inline float get_f32_le(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return std::bit_cast<float>(v);
}

inline constexpr char kMagic[4] = {'X', 'T', 'E', 'N'};
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kDtypeU8 = 2;
inline constexpr std::size_t kMaxNdim = 8;

} // namespace detail

inline std::vector<std::uint8_t> write_tensor(const TensorF32& t) {
    t.validate();
    if (t.shape.size() > detail::kMaxNdim)
        throw ShapeOverflow("ndim exceeds 8");
    std::vector<std::uint8_t> out;
    out.reserve(6 + 8 * t.shape.size() + 4 * t.data.size());
    out.insert(out.end(), detail::kMagic, detail::kMagic + 4);
    out.push_back(detail::kDtypeF32);
    out.push_back(std::uint8_t(t.shape.size()));
    for (std::size_t e : t.shape) detail::put_u64_le(out, e);
    for (float v : t.data) detail::put_f32_le(out, v);
    return out;
}

inline std::vector<std::uint8_t> write_tensor(const TensorU8& t) {
    t.validate();
    if (t.shape.size() > detail::kMaxNdim)
        throw ShapeOverflow("ndim exceeds 8");
    std::vector<std::uint8_t> out;
    out.reserve(6 + 8 * t.shape.size() + t.data.size());
    out.insert(out.end(), detail::kMagic, detail::kMagic + 4);
    out.push_back(detail::kDtypeU8);
    out.push_back(std::uint8_t(t.shape.size()));
    for (std::size_t e : t.shape) detail::put_u64_le(out, e);
    out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

inline AnyTensor read_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), detail::kMagic, 4) != 0)
        throw BadMagic("not an XTEN file");
    std::uint8_t dtype = bytes[4];
    std::uint8_t ndim = bytes[5];
    if (dtype != detail::kDtypeF32 && dtype != detail::kDtypeU8)
        throw BadMagic("unknown dtype code " + std::to_string(int(dtype)));
    if (ndim > detail::kMaxNdim)
        throw ShapeOverflow("ndim exceeds 8");
    std::size_t off = 6;
    if (bytes.size() < off + 8u * ndim)
        throw ShapeOverflow("truncated extent table");
    std::vector<std::size_t> shape(ndim);
    for (int i = 0; i < ndim; ++i) {
        std::uint64_t e = detail::get_u64_le(bytes.data() + off);
        if (e == 0 || e > std::numeric_limits<std::size_t>::max())
            throw ShapeOverflow("bad extent");
        shape[i] = std::size_t(e);
        off += 8;
    }
    std::size_t n = shape_numel(shape);
    std::size_t payload = bytes.size() - off;

    if (dtype == detail::kDtypeF32) {
        if (n > std::numeric_limits<std::size_t>::max() / 4 || payload != n * 4)
            throw ShapeOverflow("payload length does not match declared shape");
        TensorF32 t;
        t.shape = std::move(shape);
        t.data.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            t.data[i] = detail::get_f32_le(bytes.data() + off + 4 * i);
        t.validate(); // rejects NaN/Inf payloads
        return t;
    }
    if (payload != n)
        throw ShapeOverflow("payload length does not match declared shape");
    TensorU8 t;
    t.shape = std::move(shape);
    t.data.assign(bytes.begin() + long(off), bytes.end());
    return t;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw WriteFailure("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f)
        throw WriteFailure("short write to " + path.string());
}

inline AnyTensor read_tensor_file(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return read_tensor(bytes);
}

inline TensorF32 read_tensor_f32(const std::filesystem::path& path) {
    AnyTensor t = read_tensor_file(path);
    if (!std::holds_alternative<TensorF32>(t))
        throw SchemaError(path.string() + ": expected f32 tensor");
    return std::get<TensorF32>(std::move(t));
}

inline TensorU8 read_tensor_u8(const std::filesystem::path& path) {
    AnyTensor t = read_tensor_file(path);
    if (!std::holds_alternative<TensorU8>(t))
        throw SchemaError(path.string() + ": expected u8 tensor");
    return std::get<TensorU8>(std::move(t));
}

} // namespace xemap
