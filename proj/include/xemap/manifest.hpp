#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "xemap/errors.hpp"

namespace xemap {

/// One dataset entry; paths are relative to the manifest file location.
struct ManifestEntry {
    std::string id;
    std::string annotations;                 // annotation file path
    std::vector<std::string> features;       // optional feature tensor paths
    std::string ground_truth_dir;            // optional ground-truth map dir
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

/// Parse a manifest document: a JSON list of
///   {"id": str, "annotations": str, "features": [str...]?, "ground_truth_dir": str?}
inline DatasetManifest read_manifest(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_array())
        throw SchemaError("manifest must be a JSON list");

    DatasetManifest m;
    std::set<std::string> seen;
    try {
        for (const auto& j : doc) {
            ManifestEntry e;
            e.id = j.at("id").get<std::string>();
            e.annotations = j.at("annotations").get<std::string>();
            if (j.contains("features"))
                e.features = j["features"].get<std::vector<std::string>>();
            if (j.contains("ground_truth_dir"))
                e.ground_truth_dir = j["ground_truth_dir"].get<std::string>();
            if (!seen.insert(e.id).second)
                throw SchemaError("duplicate manifest id \"" + e.id + "\"");
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad manifest entry: ") + e.what());
    }
    return m;
}

/// Resolve an entry path against the manifest's own location.
inline std::filesystem::path resolve_manifest_path(const std::filesystem::path& manifest_file,
                                                   const std::string& relative) {
    std::filesystem::path p(relative);
    if (p.is_absolute())
        return p;
    return manifest_file.parent_path() / p;
}

} // namespace xemap
