#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xemap/errors.hpp"
#include "xemap/geometry.hpp"

namespace xemap {

struct QueryRecord {
    std::string text;
    std::vector<Polygon> regions;
    bool multi_hop = false;
    bool multi_ref = false;
};

struct AnnotationSet {
    int image_width = 0;
    int image_height = 0;
    std::vector<QueryRecord> queries;
};

struct AnnotationLoad {
    AnnotationSet set;
    std::size_t clamped_vertices = 0; // out-of-bounds vertices clamped on load
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(std::string("missing field \"") + key + "\"");
    return *it;
}

} // namespace detail

/// Parse the annotation document:
///   {"image": {"width": int, "height": int},
///    "queries": [{"text": str, "regions": [[[x,y],...],...],
///                 "multi_hop": bool, "multi_ref": bool}]}
/// Vertices outside [0,width] x [0,height] are clamped and counted.
inline AnnotationLoad read_annotations(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what());
    }

    AnnotationLoad out;
    try {
        const auto& image = detail::require_field(doc, "image");
        out.set.image_width = detail::require_field(image, "width").get<int>();
        out.set.image_height = detail::require_field(image, "height").get<int>();
        if (out.set.image_width < 1 || out.set.image_height < 1)
            throw SchemaError("image dimensions must be >= 1");

        const float maxx = float(out.set.image_width);
        const float maxy = float(out.set.image_height);

        for (const auto& q : detail::require_field(doc, "queries")) {
            QueryRecord rec;
            rec.text = detail::require_field(q, "text").get<std::string>();
            rec.multi_hop = detail::require_field(q, "multi_hop").get<bool>();
            rec.multi_ref = detail::require_field(q, "multi_ref").get<bool>();
            const auto& regions = detail::require_field(q, "regions");
            if (!regions.is_array())
                throw SchemaError("\"regions\" must be an array");
            if (regions.empty())
                throw EmptyRegions("query \"" + rec.text + "\" has zero polygons");
            for (const auto& region : regions) {
                Polygon poly;
                for (const auto& vtx : region) {
                    if (!vtx.is_array() || vtx.size() != 2)
                        throw SchemaError("vertex must be a 2-element array");
                    float x = vtx[0].get<float>();
                    float y = vtx[1].get<float>();
                    if (!std::isfinite(x) || !std::isfinite(y))
                        throw SchemaError("vertex coordinates must be finite");
                    float cx = std::clamp(x, 0.0f, maxx);
                    float cy = std::clamp(y, 0.0f, maxy);
                    if (cx != x || cy != y)
                        ++out.clamped_vertices;
                    poly.vertices.push_back({cx, cy});
                }
                if (poly.vertices.size() < 3)
                    throw SchemaError("region needs at least 3 vertices");
                rec.regions.push_back(std::move(poly));
            }
            out.set.queries.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("wrong field type: ") + e.what());
    }
    return out;
}

/// Deterministic serialization; read_annotations(write_annotations(a))
/// reproduces `a` field for field.
inline std::string write_annotations(const AnnotationSet& set) {
    nlohmann::ordered_json doc;
    doc["image"] = {{"width", set.image_width}, {"height", set.image_height}};
    doc["queries"] = nlohmann::ordered_json::array();
    for (const auto& q : set.queries) {
        nlohmann::ordered_json jq;
        jq["text"] = q.text;
        jq["regions"] = nlohmann::ordered_json::array();
        for (const auto& poly : q.regions) {
            nlohmann::ordered_json jp = nlohmann::ordered_json::array();
            for (const auto& v : poly.vertices)
                jp.push_back({v.x, v.y});
            jq["regions"].push_back(std::move(jp));
        }
        jq["multi_hop"] = q.multi_hop;
        jq["multi_ref"] = q.multi_ref;
        doc["queries"].push_back(std::move(jq));
    }
    return doc.dump(2) + "\n";
}

} // namespace xemap
