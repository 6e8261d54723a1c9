#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "xemap/errors.hpp"
#include "xemap/map.hpp"

namespace xemap {

/// Pixel coordinates: origin top-left, x rightward, y downward, continuous.
/// Pixel (x, y) occupies [x, x+1) x [y, y+1); its center is (x+0.5, y+0.5).
struct Vertex {
    float x = 0.0f;
    float y = 0.0f;
};

/// Implicitly closed polygon, >= 3 vertices.
struct Polygon {
    std::vector<Vertex> vertices;
};

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits; // 0/1 per pixel, row-major

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(std::size_t(w) * h, 0) {}

    bool get(int x, int y) const { return bits[std::size_t(y) * width + x] != 0; }
    void set(int x, int y) { bits[std::size_t(y) * width + x] = 1; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }
};

struct ComponentSet {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels; // 0 = background, components 1..count
    int count = 0;
    std::vector<std::size_t> pixel_counts;          // per component
    std::vector<std::array<double, 2>> centroids;   // (col, row) index units
};

namespace detail {

// Even-odd membership with the tie rule "center on a non-horizontal edge is
// inside": a crossing counts when its x-intersection is >= the test x. The
// scanline fills below use the matching left-open/right-closed spans.
inline void scanline_crossings(const Polygon& poly, double scan_y, std::vector<double>& xs) {
    const auto& v = poly.vertices;
    std::size_t n = v.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        double ay = v[j].y, by = v[i].y;
        if ((ay > scan_y) == (by > scan_y))
            continue;
        double ax = v[j].x, bx = v[i].x;
        xs.push_back(ax + (bx - ax) * (scan_y - ay) / (by - ay));
    }
}

inline void fill_polygon(const Polygon& poly, BinaryMask& mask, std::vector<double>& xs) {
    if (poly.vertices.size() < 3)
        return;
    float ymin = poly.vertices[0].y, ymax = ymin;
    for (const auto& v : poly.vertices) {
        ymin = std::min(ymin, v.y);
        ymax = std::max(ymax, v.y);
    }
    int row_lo = std::max(0, int(std::floor(ymin - 0.5)));
    int row_hi = std::min(mask.height - 1, int(std::ceil(ymax)));
    for (int y = row_lo; y <= row_hi; ++y) {
        xs.clear();
        scanline_crossings(poly, y + 0.5, xs);
        std::sort(xs.begin(), xs.end());
        std::uint8_t* row = mask.bits.data() + std::size_t(y) * mask.width;
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // pixels with x0 < i + 0.5 <= x1
            int lo = int(std::floor(xs[k] - 0.5)) + 1;
            int hi = int(std::floor(xs[k + 1] - 0.5));
            lo = std::max(lo, 0);
            hi = std::min(hi, mask.width - 1);
            for (int i = lo; i <= hi; ++i) row[i] = 1;
        }
    }
}

} // namespace detail

/// Union rasterization: pixel set iff its center lies inside any polygon under
/// the even-odd rule. Zero-area polygons set no pixels.
inline BinaryMask rasterize(std::span<const Polygon> regions, int width, int height) {
    if (width < 1 || height < 1)
        throw DimensionMismatch("rasterize requires width, height >= 1");
    BinaryMask mask(width, height);
    std::vector<double> xs;
    for (const auto& poly : regions)
        detail::fill_polygon(poly, mask, xs);
    return mask;
}

inline BinaryMask rasterize(const Polygon& poly, int width, int height) {
    return rasterize(std::span<const Polygon>(&poly, 1), width, height);
}

/// |a AND b| / |a OR b|; two empty masks agree on absence and score 1.0.
inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("mask_iou requires equal dimensions");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        inter += a.bits[i] & b.bits[i];
        uni += a.bits[i] | b.bits[i];
    }
    if (uni == 0)
        return 1.0;
    return double(inter) / double(uni);
}

inline double area_fraction(const BinaryMask& mask) {
    if (mask.bits.empty())
        return 0.0;
    return double(mask.count()) / double(mask.bits.size());
}

/// Maximal connected sets of set pixels; labels assigned in row-major
/// discovery order.
inline ComponentSet connected_components(const BinaryMask& mask, int connectivity = 8) {
    ComponentSet cs;
    cs.width = mask.width;
    cs.height = mask.height;
    cs.labels.assign(mask.bits.size(), 0);

    static constexpr int dx8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    static constexpr int dy8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
    static constexpr int dx4[4] = {0, -1, 1, 0};
    static constexpr int dy4[4] = {-1, 0, 0, 1};
    const int* dx = connectivity == 4 ? dx4 : dx8;
    const int* dy = connectivity == 4 ? dy4 : dy8;
    const int nn = connectivity == 4 ? 4 : 8;

    std::vector<std::size_t> stack;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            std::size_t idx = std::size_t(y) * mask.width + x;
            if (!mask.bits[idx] || cs.labels[idx] != 0)
                continue;
            std::int32_t label = ++cs.count;
            std::size_t pixels = 0;
            double sx = 0.0, sy = 0.0;
            stack.clear();
            stack.push_back(idx);
            cs.labels[idx] = label;
            while (!stack.empty()) {
                std::size_t cur = stack.back();
                stack.pop_back();
                int cx = int(cur % mask.width), cy = int(cur / mask.width);
                ++pixels;
                sx += cx;
                sy += cy;
                for (int k = 0; k < nn; ++k) {
                    int nx = cx + dx[k], ny = cy + dy[k];
                    if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height)
                        continue;
                    std::size_t nidx = std::size_t(ny) * mask.width + nx;
                    if (mask.bits[nidx] && cs.labels[nidx] == 0) {
                        cs.labels[nidx] = label;
                        stack.push_back(nidx);
                    }
                }
            }
            cs.pixel_counts.push_back(pixels);
            cs.centroids.push_back({sx / double(pixels), sy / double(pixels)});
        }
    }
    return cs;
}

/// Mass-weighted centroid in (col, row) index units. Requires nonnegative
/// values and positive total mass.
inline std::array<double, 2> weighted_centroid(const CorrelationMap& map) {
    double total = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < map.height; ++y) {
        const float* row = map.values.data() + std::size_t(y) * map.width;
        for (int x = 0; x < map.width; ++x) {
            double v = row[x];
            total += v;
            sx += v * x;
            sy += v * y;
        }
    }
    if (total <= 0.0)
        throw ZeroMass("weighted_centroid of zero-mass map");
    return {sx / total, sy / total};
}

} // namespace xemap
