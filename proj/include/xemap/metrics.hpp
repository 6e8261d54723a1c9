#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xemap/annotations.hpp"
#include "xemap/errors.hpp"
#include "xemap/geometry.hpp"
#include "xemap/map.hpp"

namespace xemap {

/// Mixing weights for the combined score. Frozen defaults; validate() accepts
/// any nonnegative triple summing to 1 within 1e-9.
struct RmiWeights {
    double w_su = 0.40;
    double w_as = 0.35;
    double w_da = 0.25;

    void validate() const {
        if (!(w_su >= 0.0) || !(w_as >= 0.0) || !(w_da >= 0.0))
            throw InvalidWeights("metric weights must be nonnegative");
        if (std::abs(w_su + w_as + w_da - 1.0) > 1e-9)
            throw InvalidWeights("metric weights must sum to 1");
    }
};

inline constexpr double kDefaultTauFrac = 0.5;
inline constexpr double kMinAreaFraction = 0.002;
inline constexpr double kMaxAreaFraction = 0.75;

/// One annotated ground-truth region: raster pixel count and centroid in
/// pixel-index units.
struct GtRegion {
    double cx = 0.0, cy = 0.0;
    std::size_t pixels = 0;
};

/// Per-polygon regions; polygons that rasterize empty are dropped.
inline std::vector<GtRegion> gt_regions_from_polygons(std::span<const Polygon> polygons,
                                                      int width, int height) {
    std::vector<GtRegion> out;
    for (const Polygon& poly : polygons) {
        const BinaryMask m = rasterize(std::span(&poly, 1), width, height);
        GtRegion r;
        // integer coordinate sums are exact in doubles at any feasible size
        double sx = 0.0, sy = 0.0;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (m.get(x, y)) {
                    ++r.pixels;
                    sx += x;
                    sy += y;
                }
        if (r.pixels == 0) continue;
        r.cx = sx / double(r.pixels);
        r.cy = sy / double(r.pixels);
        out.push_back(r);
    }
    return out;
}

/// Fraction of the map's mass inside the ground-truth mask; 0 when the map
/// has no mass.
inline double r_su(const CorrelationMap& map, const BinaryMask& gt) {
    if (map.width != gt.width || map.height != gt.height)
        throw DimensionMismatch("map and mask dims differ");
    double inside = 0.0, total = 0.0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        total += map.values[i];
        if (gt.bits[i]) inside += map.values[i];
    }
    if (!(total > 0.0)) return 0.0;
    return inside / total;
}

/// Distance from the map's weighted centroid to the nearest ground-truth
/// region centroid, normalized by the image diagonal and clamped to [0, 1].
/// A massless map scores 1 (worst case).
inline double r_as(const CorrelationMap& map, std::span<const GtRegion> regions) {
    if (regions.empty()) throw NoGroundTruth("no ground-truth regions");
    double total = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            const double v = map.at(x, y);
            total += v;
            sx += v * x;
            sy += v * y;
        }
    if (!(total > 0.0)) return 1.0;
    const double cx = sx / total, cy = sy / total;
    double best = std::numeric_limits<double>::infinity();
    for (const GtRegion& r : regions) {
        const double d = std::hypot(cx - r.cx, cy - r.cy);
        best = std::min(best, d);
    }
    const double diag = std::hypot(double(map.width - 1), double(map.height - 1));
    if (!(diag > 0.0)) return 0.0; // 1x1 image: everything coincides
    return std::clamp(best / diag, 0.0, 1.0);
}

namespace detail {

// Jensen-Shannon divergence (base 2, in [0, 1]) between the mass-normalized
// map and the uniform distribution over the ground-truth pixels.
inline double jsd2_map_vs_uniform(const CorrelationMap& map, const BinaryMask& gt,
                                  double total_mass, std::size_t gt_pixels) {
    const double q = 1.0 / double(gt_pixels);
    double acc = 0.0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const double p = double(map.values[i]) / total_mass;
        const double qi = gt.bits[i] ? q : 0.0;
        const double m = 0.5 * (p + qi);
        if (p > 0.0) acc += 0.5 * p * std::log2(p / m);
        if (qi > 0.0) acc += 0.5 * qi * std::log2(qi / m);
    }
    return std::clamp(acc, 0.0, 1.0);
}

} // namespace detail

/// Distribution alignment: (1 - sqrt(JSD)) scaled by the candidate/annotated
/// region-count ratio. Candidates are 8-connected components of the pixels at
/// or above tau_frac times the map maximum. Massless maps score 0.
inline double r_da(const CorrelationMap& map, const BinaryMask& gt,
                   std::size_t gt_region_count, double tau_frac = kDefaultTauFrac) {
    if (map.width != gt.width || map.height != gt.height)
        throw DimensionMismatch("map and mask dims differ");
    if (gt_region_count == 0) throw NoGroundTruth("no ground-truth regions");
    if (!(tau_frac > 0.0 && tau_frac <= 1.0))
        throw OutOfRange("tau_frac must be in (0, 1]");
    const std::size_t gt_pixels = gt.count();
    if (gt_pixels == 0) throw NoGroundTruth("ground-truth mask is empty");

    double total = 0.0;
    float mx = 0.0f;
    for (float v : map.values) {
        total += v;
        mx = std::max(mx, v);
    }
    if (!(total > 0.0)) return 0.0;

    const double divergence = std::sqrt(detail::jsd2_map_vs_uniform(map, gt, total, gt_pixels));

    const float threshold = float(tau_frac * mx);
    BinaryMask candidates(map.width, map.height);
    for (std::size_t i = 0; i < map.values.size(); ++i)
        candidates.bits[i] = map.values[i] >= threshold ? 1 : 0;
    const std::size_t c = connected_components(candidates, 8).count;

    const double ratio = double(std::min(c, gt_region_count)) /
                         double(std::max(c, gt_region_count));
    return (1.0 - divergence) * ratio;
}

/// Combined score; r_as enters inverted so larger is better for all terms.
inline double r_mi(double su, double as, double da, const RmiWeights& w = {}) {
    w.validate();
    return w.w_su * su + w.w_as * (1.0 - as) + w.w_da * da;
}

struct QueryScore {
    double r_su = 0.0, r_as = 0.0, r_da = 0.0, r_mi = 0.0;
};

struct QueryResult {
    std::string id;
    QueryScore score;
};

struct MetricReport {
    std::vector<QueryResult> queries;
    QueryScore aggregate;
    RmiWeights weights;
    double tau_frac = kDefaultTauFrac;
};

/// Score one map against one query's polygons. Maps whose dims differ from
/// the annotation dims are bilinearly resized first.
inline QueryScore evaluate_query(const CorrelationMap& map, const QueryRecord& query,
                                 int width, int height, const RmiWeights& weights = {},
                                 double tau_frac = kDefaultTauFrac) {
    weights.validate();
    const CorrelationMap* m = &map;
    CorrelationMap resized;
    if (map.width != width || map.height != height) {
        resized = bilinear_upsample(map, width, height);
        m = &resized;
    }
    const BinaryMask gt = rasterize(query.regions, width, height);
    const auto regions = gt_regions_from_polygons(query.regions, width, height);
    if (regions.empty())
        throw NoGroundTruth("query rasterizes to empty ground truth");

    QueryScore s;
    s.r_su = r_su(*m, gt);
    s.r_as = r_as(*m, regions);
    s.r_da = r_da(*m, gt, regions.size(), tau_frac);
    s.r_mi = r_mi(s.r_su, s.r_as, s.r_da, weights);
    return s;
}

/// Score a batch; ids, maps, and queries are index-aligned. Aggregate is the
/// per-metric arithmetic mean.
inline MetricReport evaluate_set(std::span<const std::string> ids,
                                 std::span<const CorrelationMap> maps,
                                 const AnnotationSet& annotations,
                                 const RmiWeights& weights = {},
                                 double tau_frac = kDefaultTauFrac) {
    if (maps.size() != annotations.queries.size() || ids.size() != maps.size())
        throw QueryCountMismatch("map count differs from query count");
    if (maps.empty()) throw EmptyInput("nothing to evaluate");
    MetricReport report;
    report.weights = weights;
    report.tau_frac = tau_frac;
    double su = 0.0, as = 0.0, da = 0.0, mi = 0.0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        QueryScore s = evaluate_query(maps[i], annotations.queries[i],
                                      annotations.image_width, annotations.image_height,
                                      weights, tau_frac);
        su += s.r_su;
        as += s.r_as;
        da += s.r_da;
        mi += s.r_mi;
        report.queries.push_back({ids[i], s});
    }
    const double inv = 1.0 / double(maps.size());
    report.aggregate = {su * inv, as * inv, da * inv, mi * inv};
    return report;
}

inline nlohmann::ordered_json report_json(const MetricReport& report) {
    nlohmann::ordered_json j;
    j["queries"] = nlohmann::ordered_json::array();
    for (const auto& q : report.queries)
        j["queries"].push_back({{"id", q.id},
                                {"r_su", q.score.r_su},
                                {"r_as", q.score.r_as},
                                {"r_da", q.score.r_da},
                                {"r_mi", q.score.r_mi}});
    j["aggregate"] = {{"r_su", report.aggregate.r_su},
                      {"r_as", report.aggregate.r_as},
                      {"r_da", report.aggregate.r_da},
                      {"r_mi", report.aggregate.r_mi}};
    j["weights"] = {report.weights.w_su, report.weights.w_as, report.weights.w_da};
    j["config"] = {{"tau_frac", report.tau_frac}};
    return j;
}

struct ValidationEntry {
    double iou = 0.0;
    double area_fraction = 0.0;
    bool pass = false;
    std::vector<std::string> reasons;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    bool all_pass = true;
};

/// Cross-check candidate annotations against a reference set: per query the
/// rasterized masks must overlap with IoU strictly above the threshold and
/// the candidate mask must cover an area fraction inside
/// [kMinAreaFraction, kMaxAreaFraction] (inclusive).
inline ValidationReport validate_annotations(const AnnotationSet& candidate,
                                             const AnnotationSet& reference,
                                             double iou_threshold = 0.5) {
    if (candidate.image_width != reference.image_width ||
        candidate.image_height != reference.image_height)
        throw DimensionMismatch("annotation sets disagree on image dims");
    if (candidate.queries.size() != reference.queries.size())
        throw QueryCountMismatch("annotation sets disagree on query count");

    ValidationReport report;
    for (std::size_t i = 0; i < candidate.queries.size(); ++i) {
        const BinaryMask a = rasterize(candidate.queries[i].regions,
                                       candidate.image_width, candidate.image_height);
        const BinaryMask b = rasterize(reference.queries[i].regions,
                                       reference.image_width, reference.image_height);
        ValidationEntry e;
        e.iou = mask_iou(a, b);
        e.area_fraction = area_fraction(a);
        if (!(e.iou > iou_threshold))
            e.reasons.push_back("iou " + std::to_string(e.iou) + " not above threshold");
        if (e.area_fraction < kMinAreaFraction)
            e.reasons.push_back("area fraction below minimum");
        if (e.area_fraction > kMaxAreaFraction)
            e.reasons.push_back("area fraction above maximum");
        e.pass = e.reasons.empty();
        report.all_pass = report.all_pass && e.pass;
        report.entries.push_back(std::move(e));
    }
    return report;
}

} // namespace xemap
