#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xemap/errors.hpp"
#include "xemap/fusion.hpp"
#include "xemap/tensor.hpp"
#include "xemap/xten.hpp"

namespace xemap {

/// Model hyperparameters carried alongside the tensors.
struct ModelMeta {
    std::size_t dim = 0;
    int heads = 0;
    int blocks = 0;
    int points = 0;
    int levels = 0;
};

namespace detail {

inline const char* kWeightsMagic = "xemap-weights-v1";

struct NamedTensor {
    std::string name;
    const TensorF32* tensor;
};

inline std::vector<NamedTensor> enumerate_params(const FusionParams& p) {
    std::vector<NamedTensor> out;
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        const auto& blk = p.blocks[b];
        const std::string prefix = "block" + std::to_string(b) + ".";
        auto mha = [&](const std::string& sub, const MhaParams& m) {
            out.push_back({prefix + sub + ".wq", &m.wq});
            out.push_back({prefix + sub + ".wk", &m.wk});
            out.push_back({prefix + sub + ".wv", &m.wv});
            out.push_back({prefix + sub + ".wo", &m.wo});
        };
        mha("img2text", blk.image_to_text);
        mha("text2img", blk.text_to_image);
        mha("text_self", blk.text_self);
        out.push_back({prefix + "deform.w_value", &blk.deform.w_value});
        out.push_back({prefix + "deform.w_offset", &blk.deform.w_offset});
        out.push_back({prefix + "deform.w_weight", &blk.deform.w_weight});
        out.push_back({prefix + "deform.w_output", &blk.deform.w_output});
    }
    return out;
}

} // namespace detail

/// Serialize: u64 LE index length, JSON index (names -> [offset, length] into
/// the tensor stream, plus meta), then the concatenated XTEN records.
inline std::vector<std::uint8_t> write_weights(const FusionParams& params,
                                               const ModelMeta& meta) {
    std::vector<std::uint8_t> stream;
    nlohmann::ordered_json index;
    index["magic"] = detail::kWeightsMagic;
    index["meta"] = {{"dim", meta.dim}, {"heads", meta.heads}, {"blocks", meta.blocks},
                     {"points", meta.points}, {"levels", meta.levels}};
    nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
    for (const auto& [name, tensor] : detail::enumerate_params(params)) {
        auto bytes = write_tensor(*tensor);
        tensors[name] = {stream.size(), bytes.size()};
        stream.insert(stream.end(), bytes.begin(), bytes.end());
    }
    index["tensors"] = std::move(tensors);

    const std::string header = index.dump();
    std::vector<std::uint8_t> out;
    out.reserve(8 + header.size() + stream.size());
    std::uint64_t hlen = header.size();
    for (int i = 0; i < 8; ++i)
        out.push_back(std::uint8_t((hlen >> (8 * i)) & 0xff));
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), stream.begin(), stream.end());
    return out;
}

inline std::pair<FusionParams, ModelMeta> read_weights(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) throw BadMagic("weights file truncated");
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i)
        hlen |= std::uint64_t(bytes[i]) << (8 * i);
    if (hlen > bytes.size() - 8) throw BadMagic("weights index length out of range");

    nlohmann::json index;
    try {
        index = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidWeights(std::string("weights index is not valid JSON: ") + e.what());
    }
    if (!index.is_object() || index.value("magic", "") != detail::kWeightsMagic)
        throw BadMagic("not a weights container");

    ModelMeta meta;
    try {
        const auto& m = index.at("meta");
        meta.dim = m.at("dim").get<std::size_t>();
        meta.heads = m.at("heads").get<int>();
        meta.blocks = m.at("blocks").get<int>();
        meta.points = m.at("points").get<int>();
        meta.levels = m.at("levels").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidWeights(std::string("weights meta malformed: ") + e.what());
    }
    if (meta.dim < 1 || meta.heads < 1 || meta.blocks < 0 || meta.points < 1 ||
        meta.levels < 1 || meta.dim % std::size_t(meta.heads) != 0)
        throw InvalidWeights("weights meta values out of range");

    const std::span<const std::uint8_t> stream = bytes.subspan(8 + hlen);
    auto fetch = [&](const std::string& name) -> TensorF32 {
        const auto& tensors = index.at("tensors");
        if (!tensors.contains(name))
            throw InvalidWeights("missing tensor \"" + name + "\"");
        const auto& loc = tensors.at(name);
        std::uint64_t off = loc.at(0).get<std::uint64_t>();
        std::uint64_t len = loc.at(1).get<std::uint64_t>();
        if (off > stream.size() || len > stream.size() - off)
            throw InvalidWeights("tensor \"" + name + "\" extends past stream end");
        auto any = read_tensor(stream.subspan(off, len));
        auto* f = std::get_if<TensorF32>(&any);
        if (!f) throw InvalidWeights("tensor \"" + name + "\" is not f32");
        return std::move(*f);
    };

    FusionParams params;
    params.n_heads = meta.heads;
    const std::size_t d = meta.dim;
    const std::size_t slots =
        std::size_t(meta.heads) * std::size_t(meta.levels) * std::size_t(meta.points);
    auto expect = [&](TensorF32 t, std::size_t r, std::size_t c, const std::string& name) {
        if (t.shape != std::vector<std::size_t>{r, c})
            throw InvalidWeights("tensor \"" + name + "\" has wrong shape");
        return t;
    };
    for (int b = 0; b < meta.blocks; ++b) {
        const std::string prefix = "block" + std::to_string(b) + ".";
        FusionBlockParams blk;
        auto mha = [&](const std::string& sub) {
            MhaParams m;
            m.wq = expect(fetch(prefix + sub + ".wq"), d, d, sub + ".wq");
            m.wk = expect(fetch(prefix + sub + ".wk"), d, d, sub + ".wk");
            m.wv = expect(fetch(prefix + sub + ".wv"), d, d, sub + ".wv");
            m.wo = expect(fetch(prefix + sub + ".wo"), d, d, sub + ".wo");
            return m;
        };
        blk.image_to_text = mha("img2text");
        blk.text_to_image = mha("text2img");
        blk.text_self = mha("text_self");
        blk.deform.points = meta.points;
        blk.deform.w_value = expect(fetch(prefix + "deform.w_value"), d, d, "w_value");
        blk.deform.w_offset =
            expect(fetch(prefix + "deform.w_offset"), d, slots * 2, "w_offset");
        blk.deform.w_weight =
            expect(fetch(prefix + "deform.w_weight"), d, slots, "w_weight");
        blk.deform.w_output = expect(fetch(prefix + "deform.w_output"), d, d, "w_output");
        params.blocks.push_back(std::move(blk));
    }
    return {std::move(params), meta};
}

inline void write_weights_file(const std::string& path, const FusionParams& params,
                               const ModelMeta& meta) {
    write_file_bytes(path, write_weights(params, meta));
}

inline std::pair<FusionParams, ModelMeta> read_weights_file(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return read_weights(bytes);
}

/// Deterministic init: every matrix entry drawn uniform from
/// [-1/sqrt(D), 1/sqrt(D)) out of one mt19937 stream, in the order
/// enumerate_params lists the tensors, row-major within each.
inline FusionParams init_weights(std::uint32_t seed, const ModelMeta& meta) {
    if (meta.dim < 1 || meta.heads < 1 || meta.points < 1 || meta.levels < 1 ||
        meta.dim % std::size_t(meta.heads) != 0)
        throw InvalidWeights("meta values out of range");
    std::mt19937 rng(seed);
    const double bound = 1.0 / std::sqrt(double(meta.dim));
    auto draw = [&]() {
        // top 24 bits -> [0, 1), exactly representable as float
        const double u = double(rng() >> 8) * (1.0 / 16777216.0);
        return float(-bound + 2.0 * bound * u);
    };
    auto fill = [&](std::size_t r, std::size_t c) {
        TensorF32 t = TensorF32::zeros({r, c});
        for (auto& v : t.data) v = draw();
        return t;
    };

    const std::size_t d = meta.dim;
    const std::size_t slots =
        std::size_t(meta.heads) * std::size_t(meta.levels) * std::size_t(meta.points);
    FusionParams params;
    params.n_heads = meta.heads;
    for (int b = 0; b < meta.blocks; ++b) {
        FusionBlockParams blk;
        auto mha = [&]() {
            MhaParams m;
            m.wq = fill(d, d);
            m.wk = fill(d, d);
            m.wv = fill(d, d);
            m.wo = fill(d, d);
            return m;
        };
        blk.image_to_text = mha();
        blk.text_to_image = mha();
        blk.text_self = mha();
        blk.deform.points = meta.points;
        blk.deform.w_value = fill(d, d);
        blk.deform.w_offset = fill(d, slots * 2);
        blk.deform.w_weight = fill(d, slots);
        blk.deform.w_output = fill(d, d);
        params.blocks.push_back(std::move(blk));
    }
    return params;
}

} // namespace xemap
