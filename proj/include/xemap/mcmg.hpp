#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xemap/annotations.hpp"
#include "xemap/errors.hpp"
#include "xemap/geometry.hpp"
#include "xemap/map.hpp"
#include "xemap/tensor.hpp"

namespace xemap {

/// Per-cell overlap ratios of a mask against a square grid. Border cells are
/// clipped to the image, so a full border cell still reaches ratio 1.
struct OverlapGrid {
    int cell_size = 0;
    int cells_x = 0, cells_y = 0;
    int width = 0, height = 0; // source image dims
    std::vector<float> ratio;  // cells_y * cells_x, row-major

    float at(int cy, int cx) const { return ratio[std::size_t(cy) * cells_x + cx]; }
};

struct McmgConfig {
    std::vector<int> grid_levels; // cell sizes, finest first; empty = derive from dims
    double sigma = 0.0;           // <= 0 = finest cell / 2
    int kernel_radius = 0;        // <= 0 = ceil(3 * sigma)
    int out_width = 0, out_height = 0; // <= 0 = native dims
};

/// Default cell sizes: min(W, H) / {64, 32, 16, 8}, floored, clamped to >= 1,
/// deduplicated, finest first.
inline std::vector<int> default_grid_levels(int width, int height) {
    const int s = std::min(width, height);
    std::vector<int> out;
    for (int div : {64, 32, 16, 8}) {
        int cell = std::max(1, s / div);
        if (out.empty() || out.back() != cell) out.push_back(cell);
    }
    return out;
}

inline OverlapGrid grid_overlap(const BinaryMask& mask, int cell_size) {
    if (cell_size < 1) throw OutOfRange("cell size must be >= 1");
    OverlapGrid g;
    g.cell_size = cell_size;
    g.width = mask.width;
    g.height = mask.height;
    g.cells_x = (mask.width + cell_size - 1) / cell_size;
    g.cells_y = (mask.height + cell_size - 1) / cell_size;
    g.ratio.assign(std::size_t(g.cells_y) * g.cells_x, 0.0f);

    std::vector<std::size_t> counts(g.cells_x);
    for (int cy = 0; cy < g.cells_y; ++cy) {
        std::fill(counts.begin(), counts.end(), 0);
        const int y0 = cy * cell_size;
        const int y1 = std::min(mask.height, y0 + cell_size);
        for (int y = y0; y < y1; ++y) {
            const std::uint8_t* row = mask.bits.data() + std::size_t(y) * mask.width;
            for (int cx = 0; cx < g.cells_x; ++cx) {
                const int x0 = cx * cell_size;
                const int x1 = std::min(mask.width, x0 + cell_size);
                std::size_t c = 0;
                for (int x = x0; x < x1; ++x) c += row[x];
                counts[cx] += c;
            }
        }
        for (int cx = 0; cx < g.cells_x; ++cx) {
            const int x0 = cx * cell_size;
            const int cw = std::min(mask.width, x0 + cell_size) - x0;
            const std::size_t area = std::size_t(cw) * std::size_t(y1 - y0);
            g.ratio[std::size_t(cy) * g.cells_x + cx] =
                float(double(counts[cx]) / double(area));
        }
    }
    return g;
}

/// Broadcast each cell's ratio to its pixels.
inline CorrelationMap expand_to_pixels(const OverlapGrid& g) {
    CorrelationMap m(g.width, g.height);
    for (int y = 0; y < g.height; ++y) {
        const float* grow = g.ratio.data() + std::size_t(y / g.cell_size) * g.cells_x;
        float* mrow = m.values.data() + std::size_t(y) * g.width;
        for (int cx = 0; cx < g.cells_x; ++cx) {
            const int x0 = cx * g.cell_size;
            const int x1 = std::min(g.width, x0 + g.cell_size);
            std::fill(mrow + x0, mrow + x1, grow[cx]);
        }
    }
    return m;
}

/// Pixelwise arithmetic mean across per-level expansions.
inline CorrelationMap aggregate_levels(std::span<const CorrelationMap> maps) {
    return pixelwise_mean(maps);
}

namespace detail {

inline int reflect_index(long t, long n) {
    if (n == 1) return 0;
    long m = t % (2 * n);
    if (m < 0) m += 2 * n;
    return int(m < n ? m : 2 * n - 1 - m);
}

// Truncated Gaussian taps, renormalized to sum 1, as a prefix-sum table:
// prefix[i] = sum of taps [0, i), length 2*radius + 2.
inline std::vector<double> gaussian_kernel_prefix(double sigma, int radius) {
    std::vector<double> taps(std::size_t(2) * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-(double(i) * i) / (2.0 * sigma * sigma));
        sum += taps[i + radius];
    }
    std::vector<double> prefix(taps.size() + 1, 0.0);
    for (std::size_t i = 0; i < taps.size(); ++i)
        prefix[i + 1] = prefix[i] + taps[i] / sum;
    return prefix;
}

// One horizontal pass. Rows are reflect-padded (symmetric, edge sample
// repeated), then convolved by walking constant-value runs with kernel
// prefix sums, so cost scales with run boundaries instead of the radius.
inline void smooth_rows(const float* src, float* dst, int w, int h,
                        const std::vector<double>& prefix, int radius) {
    const int pw = w + 2 * radius;
    const int win = 2 * radius + 1;
    std::vector<float> pad(pw);
    std::vector<int> seg;
    seg.reserve(std::size_t(pw) + 1);
    for (int y = 0; y < h; ++y) {
        const float* row = src + std::size_t(y) * w;
        for (int t = 0; t < pw; ++t)
            pad[t] = row[reflect_index(long(t) - radius, w)];
        seg.clear();
        seg.push_back(0);
        for (int i = 1; i < pw; ++i)
            if (pad[i] != pad[i - 1]) seg.push_back(i);
        seg.push_back(pw);
        const int nseg = int(seg.size()) - 1;

        float* out = dst + std::size_t(y) * w;
        int s0 = 0;
        for (int x = 0; x < w; ++x) {
            const int lo = x, hi = x + win; // window in padded coordinates
            while (s0 + 1 < nseg && seg[s0 + 1] <= lo) ++s0;
            double acc = 0.0;
            for (int s = s0; s < nseg && seg[s] < hi; ++s) {
                const int a = std::max(seg[s], lo);
                const int b = std::min(seg[s + 1], hi);
                acc += double(pad[seg[s]]) * (prefix[b - lo] - prefix[a - lo]);
            }
            out[x] = float(std::clamp(acc, 0.0, 1.0));
        }
    }
}

inline void transpose(const float* src, float* dst, int w, int h) {
    constexpr int kBlock = 64;
    for (int y0 = 0; y0 < h; y0 += kBlock)
        for (int x0 = 0; x0 < w; x0 += kBlock) {
            const int ym = std::min(y0 + kBlock, h);
            const int xm = std::min(x0 + kBlock, w);
            for (int y = y0; y < ym; ++y)
                for (int x = x0; x < xm; ++x)
                    dst[std::size_t(x) * h + y] = src[std::size_t(y) * w + x];
        }
}

} // namespace detail

/// Separable Gaussian blur with reflect padding; the truncated kernel is
/// renormalized so mass is preserved and [0, 1] inputs stay in [0, 1].
inline CorrelationMap gaussian_smooth(const CorrelationMap& map, double sigma, int radius) {
    if (!(sigma > 0.0)) throw OutOfRange("sigma must be > 0");
    if (radius < 1) throw OutOfRange("kernel radius must be >= 1");
    const auto prefix = detail::gaussian_kernel_prefix(sigma, radius);
    const int w = map.width, h = map.height;
    const std::size_t n = std::size_t(w) * h;

    std::vector<float> a(n), b(n);
    detail::smooth_rows(map.values.data(), a.data(), w, h, prefix, radius);
    detail::transpose(a.data(), b.data(), w, h); // b is h x w
    detail::smooth_rows(b.data(), a.data(), h, w, prefix, radius);
    CorrelationMap out(w, h);
    detail::transpose(a.data(), out.values.data(), h, w);
    return out;
}

/// Quantize [0, 1] values to u8 by round-half-away-from-zero; values beyond
/// 1e-6 outside the range are an error, within it they clamp.
inline TensorU8 quantize_u8(const CorrelationMap& map) {
    TensorU8 t = TensorU8::zeros({std::size_t(map.height), std::size_t(map.width)});
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const float v = map.values[i];
        if (!(v >= -1e-6f && v <= 1.0f + 1e-6f))
            throw OutOfRange("quantize input outside [0, 1]");
        const float c = std::clamp(v, 0.0f, 1.0f);
        t.data[i] = std::uint8_t(std::lround(c * 255.0f));
    }
    return t;
}

struct McmgResult {
    TensorU8 map; // (H, W) u8
    std::vector<std::string> warnings;
};

// Resolved per-run parameters, after defaults.
struct McmgPlan {
    std::vector<int> levels;
    double sigma;
    int radius;
    int out_w, out_h;
};

inline McmgPlan resolve_mcmg_config(const McmgConfig& cfg, int width, int height) {
    McmgPlan plan;
    plan.levels = cfg.grid_levels.empty() ? default_grid_levels(width, height)
                                          : cfg.grid_levels;
    for (std::size_t i = 0; i < plan.levels.size(); ++i) {
        if (plan.levels[i] < 1)
            throw OutOfRange("grid cell size must be >= 1");
        for (std::size_t j = 0; j < i; ++j)
            if (plan.levels[j] == plan.levels[i])
                throw OutOfRange("duplicate grid cell size");
    }
    const int finest = *std::min_element(plan.levels.begin(), plan.levels.end());
    plan.sigma = cfg.sigma > 0.0 ? cfg.sigma : double(finest) / 2.0;
    plan.radius = cfg.kernel_radius > 0 ? cfg.kernel_radius
                                        : int(std::ceil(3.0 * plan.sigma));
    plan.radius = std::max(1, plan.radius);
    plan.out_w = cfg.out_width > 0 ? cfg.out_width : width;
    plan.out_h = cfg.out_height > 0 ? cfg.out_height : height;
    return plan;
}

/// Full pipeline for one query: rasterize the regions, overlap-ratio each
/// grid level, average the per-level expansions, smooth, optionally resize,
/// quantize. The level accumulation is arithmetically identical to
/// aggregate_levels over expand_to_pixels results, without materializing
/// per-level maps.
inline McmgResult mcmg_compile(const QueryRecord& query, int width, int height,
                               const McmgConfig& cfg = {}) {
    if (width < 1 || height < 1) throw OutOfRange("image dims must be >= 1");
    if (query.regions.empty()) throw EmptyRegions("query has no regions");
    const auto plan = resolve_mcmg_config(cfg, width, height);

    McmgResult result;
    const BinaryMask mask = rasterize(query.regions, width, height);
    if (mask.count() == 0)
        result.warnings.push_back("query rasterizes to an empty mask");

    const std::size_t n = std::size_t(width) * height;
    std::vector<double> accum(n, 0.0);
    for (int cell : plan.levels) {
        const OverlapGrid grid = grid_overlap(mask, cell);
        for (int y = 0; y < height; ++y) {
            const float* grow = grid.ratio.data() + std::size_t(y / cell) * grid.cells_x;
            double* arow = accum.data() + std::size_t(y) * width;
            for (int cx = 0; cx < grid.cells_x; ++cx) {
                const int x0 = cx * cell;
                const int x1 = std::min(width, x0 + cell);
                const double v = grow[cx];
                for (int x = x0; x < x1; ++x) arow[x] += v;
            }
        }
    }
    CorrelationMap agg(width, height);
    const double inv = 1.0 / double(plan.levels.size());
    for (std::size_t i = 0; i < n; ++i)
        agg.values[i] = float(accum[i] * inv);
    accum.clear();
    accum.shrink_to_fit();

    CorrelationMap smoothed = gaussian_smooth(agg, plan.sigma, plan.radius);
    agg.values.clear();
    agg.values.shrink_to_fit();

    if (plan.out_w != width || plan.out_h != height)
        smoothed = bilinear_upsample(smoothed, plan.out_w, plan.out_h);
    result.map = quantize_u8(smoothed);
    return result;
}

} // namespace xemap
