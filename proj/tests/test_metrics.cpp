#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "xemap/metrics.hpp"

#include "oracles.hpp"

using namespace xemap;

namespace {

Polygon rect(float x0, float y0, float x1, float y1) {
    return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

// Indicator map: 1 where the mask is set.
CorrelationMap indicator(const BinaryMask& m, float value = 1.0f) {
    CorrelationMap map(m.width, m.height);
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        map.values[i] = m.bits[i] ? value : 0.0f;
    return map;
}

CorrelationMap random_nonneg_map(std::mt19937& rng, int w, int h) {
    CorrelationMap m(w, h);
    for (auto& v : m.values) v = float(rng() % 1001) / 1000.0f;
    return m;
}

} // namespace

TEST_CASE("mass fraction inside the ground truth") {
    const BinaryMask gt = rasterize(rect(1, 1, 3, 3), 4, 4); // 4 of 16 pixels

    CHECK(r_su(indicator(gt), gt) == 1.0);

    CorrelationMap uniform(4, 4, 1.0f);
    CHECK(r_su(uniform, gt) == 4.0 / 16.0);

    CorrelationMap off(4, 4);
    off.at(0, 0) = 0.8f; // outside the region
    CHECK(r_su(off, gt) == 0.0);

    CHECK(r_su(CorrelationMap(4, 4), gt) == 0.0);

    CHECK_THROWS_AS(r_su(CorrelationMap(3, 4), gt), DimensionMismatch);
}

TEST_CASE("centroid distance to the nearest annotated region") {
    SECTION("indicator of a single region sits exactly on its centroid") {
        const std::vector<Polygon> polys{rect(2, 1, 7, 5)};
        const auto regions = gt_regions_from_polygons(polys, 10, 8);
        REQUIRE(regions.size() == 1);
        const BinaryMask gt = rasterize(polys, 10, 8);
        CHECK(r_as(indicator(gt), regions) == 0.0);
    }
    SECTION("opposite corners give exactly the diagonal") {
        const std::vector<Polygon> polys{rect(3, 2, 4, 3)}; // single pixel (3,2)
        const auto regions = gt_regions_from_polygons(polys, 4, 3);
        CorrelationMap m(4, 3);
        m.at(0, 0) = 1.0f;
        CHECK(r_as(m, regions) == 1.0);
    }
    SECTION("column image with two regions picks the nearer one") {
        const std::vector<Polygon> polys{rect(0, 0, 1, 1), rect(0, 9, 1, 10)};
        const auto regions = gt_regions_from_polygons(polys, 1, 10);
        REQUIRE(regions.size() == 2);
        CorrelationMap m(1, 10);
        m.at(0, 2) = 0.5f;
        CHECK(r_as(m, regions) == 2.0 / 9.0);
    }
    SECTION("zero mass is the worst case") {
        const std::vector<Polygon> polys{rect(0, 0, 2, 2)};
        const auto regions = gt_regions_from_polygons(polys, 4, 4);
        CHECK(r_as(CorrelationMap(4, 4), regions) == 1.0);
    }
    CHECK_THROWS_AS(r_as(CorrelationMap(4, 4), std::vector<GtRegion>{}), NoGroundTruth);
}

TEST_CASE("distribution alignment on exact fixtures") {
    SECTION("indicator over one rectangular region") {
        const BinaryMask gt = rasterize(rect(1, 1, 4, 3), 6, 5);
        CHECK(r_da(indicator(gt), gt, 1) == 1.0);
        CHECK(r_da(indicator(gt, 0.25f), gt, 1) == 1.0); // scale-free
    }
    SECTION("two single-pixel regions, two candidate peaks") {
        const std::vector<Polygon> polys{rect(0, 0, 1, 1), rect(5, 5, 6, 6)};
        const BinaryMask gt = rasterize(polys, 6, 6);
        CHECK(r_da(indicator(gt), gt, 2) == 1.0);
    }
    SECTION("candidate/region count mismatch scales the score") {
        const std::vector<Polygon> polys{rect(0, 0, 1, 1), rect(5, 5, 6, 6)};
        const BinaryMask gt = rasterize(polys, 6, 6);
        // same mask as ground truth but declared as one annotated region
        CHECK(r_da(indicator(gt), gt, 1) == 0.5);
    }
    SECTION("mass disjoint from the ground truth scores zero") {
        const BinaryMask gt = rasterize(rect(0, 0, 1, 4), 4, 4);
        CorrelationMap m(4, 4);
        for (int y = 0; y < 4; ++y) m.at(3, y) = 0.7f;
        CHECK(r_da(m, gt, 1) <= 1e-9);
        CHECK(r_da(m, gt, 1) >= 0.0);
    }
    SECTION("zero mass scores zero") {
        const BinaryMask gt = rasterize(rect(0, 0, 2, 2), 4, 4);
        CHECK(r_da(CorrelationMap(4, 4), gt, 1) == 0.0);
    }
    SECTION("parameter validation") {
        const BinaryMask gt = rasterize(rect(0, 0, 2, 2), 4, 4);
        const CorrelationMap m(4, 4, 0.5f);
        CHECK_THROWS_AS(r_da(m, gt, 0), NoGroundTruth);
        CHECK_THROWS_AS(r_da(m, BinaryMask(4, 4), 1), NoGroundTruth);
        CHECK_THROWS_AS(r_da(m, gt, 1, 0.0), OutOfRange);
        CHECK_THROWS_AS(r_da(m, gt, 1, 1.5), OutOfRange);
        CHECK_THROWS_AS(r_da(CorrelationMap(3, 4), gt, 1), DimensionMismatch);
    }
}

TEST_CASE("distribution alignment matches a from-scratch recomputation") {
    std::mt19937 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        const CorrelationMap m = random_nonneg_map(rng, 16, 16);
        BinaryMask gt(16, 16);
        for (auto& b : gt.bits) b = (rng() % 4) == 0 ? 1 : 0;
        if (gt.count() == 0) gt.set(3, 3);
        const std::size_t k = 1 + rng() % 3;

        double total = 0.0;
        float mx = 0.0f;
        for (float v : m.values) {
            total += v;
            mx = std::max(mx, v);
        }
        std::vector<double> p(m.values.size()), q(m.values.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = double(m.values[i]) / total;
            q[i] = gt.bits[i] ? 1.0 / double(gt.count()) : 0.0;
        }
        const double div = std::sqrt(std::clamp(oracle::jsd2(p, q), 0.0, 1.0));

        const float threshold = float(0.5 * mx);
        std::vector<std::uint8_t> cand(m.values.size());
        for (std::size_t i = 0; i < cand.size(); ++i)
            cand[i] = m.values[i] >= threshold ? 1 : 0;
        const int c = oracle::flood_components(cand, 16, 16, 8);
        const double ratio = double(std::min<std::size_t>(c, k)) /
                             double(std::max<std::size_t>(c, k));

        CHECK(r_da(m, gt, k) == Catch::Approx((1.0 - div) * ratio).margin(1e-6));
    }
}

TEST_CASE("combined score mixes the three terms") {
    CHECK(r_mi(1.0, 0.0, 1.0) == 1.0);
    CHECK(r_mi(0.0, 1.0, 0.0) == 0.0);
    CHECK(r_mi(0.5, 0.5, 0.5) == Catch::Approx(0.5).margin(1e-12));

    CHECK(r_mi(0.9, 0.2, 0.3) > r_mi(0.8, 0.2, 0.3)); // better coverage helps
    CHECK(r_mi(0.5, 0.6, 0.3) < r_mi(0.5, 0.4, 0.3)); // larger distance hurts

    CHECK_THROWS_AS(r_mi(0.5, 0.5, 0.5, RmiWeights{0.5, 0.5, 0.5}), InvalidWeights);
    CHECK_THROWS_AS(r_mi(0.5, 0.5, 0.5, RmiWeights{-0.1, 0.85, 0.25}), InvalidWeights);
    CHECK_NOTHROW(RmiWeights{0.2, 0.3, 0.5}.validate());
}

TEST_CASE("combined score reproduces recorded evaluation aggregates") {
    // (expected mi, su, as, da)
    const double rows[8][4] = {
        {0.4275, 0.5969, 0.7343, 0.3829},
        {0.4202, 0.5743, 0.7268, 0.3796},
        {0.4711, 0.6449, 0.6963, 0.4275},
        {0.4903, 0.6358, 0.6617, 0.4701},
        {0.5789, 0.8651, 0.6606, 0.4565},
        {0.5758, 0.8649, 0.6615, 0.4454},
        {0.5429, 0.8764, 0.7282, 0.3886},
        {0.5789, 0.8651, 0.6606, 0.4565},
    };
    for (const auto& row : rows)
        CHECK(r_mi(row[1], row[2], row[3]) == Catch::Approx(row[0]).margin(0.0005));
}

TEST_CASE("regions are counted per polygon") {
    std::vector<Polygon> polys{rect(0, 0, 2, 2), rect(1, 1, 3, 3)}; // overlapping
    auto regions = gt_regions_from_polygons(polys, 8, 8);
    REQUIRE(regions.size() == 2);
    CHECK(regions[0].pixels == 4);
    CHECK(regions[0].cx == 0.5);
    CHECK(regions[0].cy == 0.5);
    CHECK(regions[1].cx == 1.5);

    // degenerate polygon rasterizes empty and is dropped
    polys.push_back(Polygon{{{5.0f, 5.0f}, {5.0f, 5.0f}, {5.0f, 5.0f}}});
    CHECK(gt_regions_from_polygons(polys, 8, 8).size() == 2);
}

TEST_CASE("query evaluation end to end") {
    QueryRecord query;
    query.regions = {rect(2, 2, 6, 6)};

    SECTION("indicator prediction is a perfect score") {
        const BinaryMask gt = rasterize(query.regions, 8, 8);
        const QueryScore s = evaluate_query(indicator(gt), query, 8, 8);
        CHECK(s.r_su == 1.0);
        CHECK(s.r_as == 0.0);
        CHECK(s.r_da == 1.0);
        CHECK(s.r_mi == 1.0);
    }
    SECTION("zero prediction is the floor") {
        const QueryScore s = evaluate_query(CorrelationMap(8, 8), query, 8, 8);
        CHECK(s.r_su == 0.0);
        CHECK(s.r_as == 1.0);
        CHECK(s.r_da == 0.0);
        CHECK(s.r_mi == 0.0);
    }
    SECTION("maps at a different resolution are resized first") {
        const QueryScore a = evaluate_query(CorrelationMap(4, 4, 0.5f), query, 8, 8);
        const QueryScore b = evaluate_query(CorrelationMap(8, 8, 0.5f), query, 8, 8);
        CHECK(a.r_su == b.r_su);
        CHECK(a.r_as == b.r_as);
        CHECK(a.r_da == b.r_da);
    }
    SECTION("degenerate annotations are rejected") {
        QueryRecord bad;
        bad.regions = {Polygon{{{1.0f, 1.0f}, {1.0f, 1.0f}, {1.0f, 1.0f}}}};
        CHECK_THROWS_AS(evaluate_query(CorrelationMap(8, 8, 0.5f), bad, 8, 8),
                        NoGroundTruth);
    }
    SECTION("weights are validated") {
        CHECK_THROWS_AS(evaluate_query(CorrelationMap(8, 8, 0.5f), query, 8, 8,
                                       RmiWeights{0.9, 0.9, 0.9}),
                        InvalidWeights);
    }
}

TEST_CASE("set evaluation aggregates per-metric means") {
    AnnotationSet ann;
    ann.image_width = 8;
    ann.image_height = 8;
    QueryRecord q1, q2;
    q1.regions = {rect(0, 0, 4, 4)};
    q2.regions = {rect(4, 4, 8, 8)};
    ann.queries = {q1, q2};

    std::vector<CorrelationMap> maps;
    maps.push_back(indicator(rasterize(q1.regions, 8, 8))); // perfect
    maps.push_back(CorrelationMap(8, 8));                   // empty
    const std::vector<std::string> ids{"a", "b"};

    const MetricReport report = evaluate_set(ids, maps, ann);
    REQUIRE(report.queries.size() == 2);
    CHECK(report.queries[0].id == "a");
    CHECK(report.queries[1].id == "b");
    CHECK(report.queries[0].score.r_mi == 1.0);
    CHECK(report.queries[1].score.r_mi == 0.0);
    CHECK(report.aggregate.r_mi == 0.5);
    CHECK(report.aggregate.r_su == 0.5);
    CHECK(report.aggregate.r_as == 0.5);
    CHECK(report.aggregate.r_da == 0.5);

    CHECK_THROWS_AS(evaluate_set(std::vector<std::string>{"a"},
                                 std::span(maps.data(), 1), ann),
                    QueryCountMismatch);
    AnnotationSet none;
    none.image_width = none.image_height = 8;
    CHECK_THROWS_AS(evaluate_set(std::vector<std::string>{},
                                 std::vector<CorrelationMap>{}, none),
                    EmptyInput);
}

TEST_CASE("report serialization layout") {
    MetricReport report;
    report.queries.push_back({"q0", {0.5, 0.25, 0.75, 0.65}});
    report.aggregate = {0.5, 0.25, 0.75, 0.65};

    const auto j = report_json(report);
    REQUIRE(j.contains("queries"));
    REQUIRE(j.contains("aggregate"));
    REQUIRE(j.contains("weights"));
    REQUIRE(j.contains("config"));

    REQUIRE(j["weights"].is_array());
    REQUIRE(j["weights"].size() == 3);
    CHECK(j["weights"][0].get<double>() == 0.40);
    CHECK(j["weights"][1].get<double>() == 0.35);
    CHECK(j["weights"][2].get<double>() == 0.25);

    CHECK(j["config"]["tau_frac"].get<double>() == 0.5);
    CHECK(j["queries"][0]["id"].get<std::string>() == "q0");
    CHECK(j["queries"][0]["r_su"].get<double>() == 0.5);
    CHECK(j["queries"][0]["r_as"].get<double>() == 0.25);
    CHECK(j["aggregate"]["r_mi"].get<double>() == 0.65);
}

TEST_CASE("annotation cross-checks") {
    auto one_query_set = [](std::vector<Polygon> regions) {
        AnnotationSet s;
        s.image_width = 100;
        s.image_height = 100;
        QueryRecord q;
        q.regions = std::move(regions);
        s.queries.push_back(std::move(q));
        return s;
    };

    SECTION("identical medium-sized regions pass") {
        const auto a = one_query_set({rect(10, 10, 50, 40)});
        const auto report = validate_annotations(a, a, 0.5);
        REQUIRE(report.entries.size() == 1);
        CHECK(report.entries[0].pass);
        CHECK(report.all_pass);
        CHECK(report.entries[0].iou == 1.0);
    }
    SECTION("disjoint regions fail on overlap") {
        const auto a = one_query_set({rect(0, 0, 20, 20)});
        const auto b = one_query_set({rect(50, 50, 80, 80)});
        const auto report = validate_annotations(a, b, 0.5);
        CHECK_FALSE(report.all_pass);
        REQUIRE(report.entries[0].reasons.size() >= 1);
        CHECK(report.entries[0].reasons[0].find("iou") != std::string::npos);
    }
    SECTION("overlap exactly at the threshold fails") {
        const auto a = one_query_set({rect(0, 0, 10, 1)});
        const auto b = one_query_set({rect(0, 0, 5, 1)}); // subset: iou = 5/10
        const auto report = validate_annotations(a, b, 0.5);
        CHECK(report.entries[0].iou == 0.5);
        CHECK_FALSE(report.entries[0].pass);
    }
    SECTION("area bounds are inclusive") {
        const auto small = one_query_set({rect(0, 0, 20, 1)}); // 20 px = 0.002
        CHECK(validate_annotations(small, small, 0.5).all_pass);
        const auto big = one_query_set({rect(0, 0, 100, 75)}); // 0.75
        CHECK(validate_annotations(big, big, 0.5).all_pass);
    }
    SECTION("area outside the band fails with a reason") {
        const auto tiny = one_query_set({rect(0, 0, 1, 1)}); // 1e-4
        const auto r1 = validate_annotations(tiny, tiny, 0.5);
        CHECK_FALSE(r1.all_pass);
        CHECK(r1.entries[0].reasons[0].find("below minimum") != std::string::npos);

        const auto full = one_query_set({rect(0, 0, 100, 100)});
        const auto r2 = validate_annotations(full, full, 0.5);
        CHECK_FALSE(r2.all_pass);
        CHECK(r2.entries[0].reasons[0].find("above maximum") != std::string::npos);
    }
    SECTION("structural mismatches are errors") {
        auto a = one_query_set({rect(0, 0, 20, 20)});
        auto b = one_query_set({rect(0, 0, 20, 20)});
        b.image_width = 50;
        CHECK_THROWS_AS(validate_annotations(a, b, 0.5), DimensionMismatch);
        b = a;
        b.queries.push_back(b.queries[0]);
        CHECK_THROWS_AS(validate_annotations(a, b, 0.5), QueryCountMismatch);
    }
}
