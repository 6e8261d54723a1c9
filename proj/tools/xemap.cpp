// Subcommand front-end: mcmg, infer, eval, validate, render, synth.
// Exit codes: 0 ok, 1 validation failures, 2 bad input, 3 write failure,
// 4 invalid metric weights.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xemap/xemap.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct GlobalOpts {
    int threads = 1;
    std::uint32_t seed = 0;
    bool verbose = false;
};

void note(const GlobalOpts& g, const std::string& msg) {
    if (g.verbose) std::cerr << "xemap: " << msg << "\n";
}

// ---- atomic writes: stage to <path>.partial, rename on success ----

fs::path partial_path(const fs::path& p) { return fs::path(p.string() + ".partial"); }

void commit(const fs::path& p) {
    std::error_code ec;
    fs::rename(partial_path(p), p, ec);
    if (ec)
        throw xemap::WriteFailure("cannot finalize " + p.string() + ": " + ec.message());
}

void write_bytes_atomic(const fs::path& p, std::span<const std::uint8_t> bytes) {
    xemap::write_file_bytes(partial_path(p), bytes);
    commit(p);
}

void write_text_atomic(const fs::path& p, const std::string& text) {
    write_bytes_atomic(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

void write_png_atomic(const fs::path& p, const xemap::PngImage& img) {
    xemap::write_png(partial_path(p), img);
    commit(p);
}

void write_map_png_atomic(const fs::path& p, const xemap::TensorU8& t) {
    xemap::save_map_png(partial_path(p), t);
    commit(p);
}

// ---- small parsers; all failures are bad input ----

std::string read_text_file(const fs::path& p) {
    const auto bytes = xemap::read_file_bytes(p);
    return std::string(bytes.begin(), bytes.end());
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        try {
            std::size_t used = 0;
            const int v = std::stoi(s.substr(pos, comma - pos), &used);
            if (used != comma - pos) throw std::invalid_argument("trailing chars");
            out.push_back(v);
        } catch (const std::exception&) {
            throw xemap::SchemaError("cannot parse integer list \"" + s + "\"");
        }
        pos = comma + 1;
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        try {
            std::size_t used = 0;
            const double v = std::stod(s.substr(pos, comma - pos), &used);
            if (used != comma - pos) throw std::invalid_argument("trailing chars");
            out.push_back(v);
        } catch (const std::exception&) {
            throw xemap::SchemaError("cannot parse number list \"" + s + "\"");
        }
        pos = comma + 1;
    }
    return out;
}

// "WxH"
std::pair<int, int> parse_wh(const std::string& s) {
    const std::size_t x = s.find('x');
    if (x == std::string::npos)
        throw xemap::SchemaError("expected WxH, got \"" + s + "\"");
    const auto a = parse_int_list(s.substr(0, x));
    const auto b = parse_int_list(s.substr(x + 1));
    if (a.size() != 1 || b.size() != 1 || a[0] < 1 || b[0] < 1)
        throw xemap::SchemaError("expected WxH, got \"" + s + "\"");
    return {a[0], b[0]};
}

std::string format_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------- mcmg ----

struct McmgOpts {
    std::string annotations;
    std::string out_dir;
    std::string levels;
    double sigma = 0.0;
    int radius = 0;
    std::string out_dims;
    std::string format = "png";
    std::string id;
};

int run_mcmg(const GlobalOpts& g, const McmgOpts& o) {
    const auto load = xemap::read_annotations(read_text_file(o.annotations));
    const xemap::AnnotationSet& set = load.set;
    if (load.clamped_vertices > 0)
        std::cerr << "xemap: clamped " << load.clamped_vertices
                  << " out-of-bounds vertices\n";
    for (const auto& q : set.queries)
        if (q.multi_ref && q.regions.size() < 2)
            std::cerr << "xemap: multi-ref query \"" << q.text
                      << "\" has a single region\n";

    xemap::McmgConfig cfg;
    if (!o.levels.empty()) cfg.grid_levels = parse_int_list(o.levels);
    cfg.sigma = o.sigma;
    cfg.kernel_radius = o.radius;
    if (!o.out_dims.empty()) {
        auto [w, h] = parse_wh(o.out_dims);
        cfg.out_width = w;
        cfg.out_height = h;
    }
    const xemap::McmgPlan plan =
        xemap::resolve_mcmg_config(cfg, set.image_width, set.image_height);

    const std::string id =
        o.id.empty() ? fs::path(o.annotations).stem().string() : o.id;
    fs::create_directories(o.out_dir);

    std::vector<xemap::McmgResult> results(set.queries.size());
    xemap::parallel_for(set.queries.size(), g.threads, [&](std::size_t i) {
        results[i] = xemap::mcmg_compile(set.queries[i], set.image_width,
                                         set.image_height, cfg);
    });

    for (std::size_t i = 0; i < results.size(); ++i) {
        for (const auto& w : results[i].warnings)
            std::cerr << "xemap: query " << i << ": " << w << "\n";
        const std::string stem = id + "_" + std::to_string(i);
        if (o.format == "png" || o.format == "both")
            write_map_png_atomic(fs::path(o.out_dir) / (stem + ".png"), results[i].map);
        if (o.format == "xten" || o.format == "both")
            write_bytes_atomic(fs::path(o.out_dir) / (stem + ".xten"),
                               xemap::write_tensor(results[i].map));
        note(g, "wrote map for query " + std::to_string(i));
    }

    ordered_json sidecar;
    sidecar["image"] = {{"width", set.image_width}, {"height", set.image_height}};
    sidecar["grid_levels"] = plan.levels;
    sidecar["sigma"] = plan.sigma;
    sidecar["kernel_radius"] = plan.radius;
    sidecar["out_width"] = plan.out_w;
    sidecar["out_height"] = plan.out_h;
    sidecar["format"] = o.format;
    sidecar["queries"] = set.queries.size();
    write_text_atomic(fs::path(o.out_dir) / (id + "_config.json"),
                      sidecar.dump(2) + "\n");
    return 0;
}

// --------------------------------------------------------------- infer ----

struct InferOpts {
    std::vector<std::string> features;
    std::string text;
    std::string weights;
    std::string out;
    std::string png;
    std::string pool = "average";
    std::string out_dims;
    int blocks = 1;
    int heads = 4;
    int points = 4;
};

int run_infer(const GlobalOpts& g, const InferOpts& o) {
    xemap::TensorF32 text_tensor = xemap::read_tensor_f32(o.text);
    if (text_tensor.shape.size() != 2)
        throw xemap::DimensionMismatch("text tensor must be (S, D)");
    xemap::TextEmbeddingSequence text;
    text.length = text_tensor.shape[0];
    text.dim = text_tensor.shape[1];
    text.data = std::move(text_tensor.data);

    xemap::MultiscaleFeatureSet features;
    for (const auto& path : o.features)
        features.levels.push_back(xemap::read_tensor_f32(path));
    features.validate();
    if (features.dim() != text.dim)
        throw xemap::DimensionMismatch("text and feature embedding dims differ");

    xemap::FusionParams params;
    if (!o.weights.empty()) {
        auto [p, meta] = xemap::read_weights_file(o.weights);
        if (meta.dim != text.dim)
            throw xemap::DimensionMismatch("weights were built for a different D");
        if (meta.levels != int(features.levels.size()))
            throw xemap::DimensionMismatch("weights were built for a different level count");
        params = std::move(p);
        note(g, "loaded weights: " + std::to_string(params.blocks.size()) + " blocks");
    } else {
        xemap::ModelMeta meta;
        meta.dim = text.dim;
        meta.heads = o.heads;
        meta.blocks = o.blocks;
        meta.points = o.points;
        meta.levels = int(features.levels.size());
        if (meta.heads < 1 || meta.dim % std::size_t(meta.heads) != 0)
            throw xemap::DimensionMismatch("embedding dim not divisible by head count");
        params = xemap::init_weights(g.seed, meta);
        note(g, "seeded weights from seed " + std::to_string(g.seed));
    }

    auto [text_out, image_out] = xemap::fusion_forward(text, features, params);

    int out_w = image_out.level_dims[0][1];
    int out_h = image_out.level_dims[0][0];
    if (!o.out_dims.empty()) {
        auto [w, h] = parse_wh(o.out_dims);
        out_w = w;
        out_h = h;
    }
    const xemap::CorrelationMap map = xemap::hmsa_forward(
        image_out, text_out, out_w, out_h, xemap::pool_mode_from_string(o.pool));

    write_bytes_atomic(o.out, xemap::write_tensor(xemap::map_to_tensor(map)));
    if (!o.png.empty())
        write_map_png_atomic(o.png, xemap::quantize_u8(map));
    return 0;
}

// ---------------------------------------------------------------- eval ----

struct EvalOpts {
    std::string pred_dir;
    std::string annotations;
    std::string out;
    std::string weights;
    double tau = xemap::kDefaultTauFrac;
    std::string id;
};

xemap::CorrelationMap load_prediction(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".png", ".xten"}) {
        const fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return xemap::load_correlation_map(p);
    }
    throw xemap::IoError("missing prediction " + (dir / (stem + ".png")).string() +
                         " (or .xten)");
}

int run_eval(const GlobalOpts& g, const EvalOpts& o) {
    xemap::RmiWeights weights;
    if (!o.weights.empty()) {
        const auto w = parse_double_list(o.weights);
        if (w.size() != 3)
            throw xemap::SchemaError("--weights needs exactly three numbers");
        weights = {w[0], w[1], w[2]};
    }
    weights.validate();
    if (!(o.tau > 0.0 && o.tau <= 1.0))
        throw xemap::OutOfRange("--tau must be in (0, 1]");

    // one evaluation task per (entry, query)
    struct Task {
        std::string id;
        xemap::QueryRecord query;
        int width, height;
    };
    std::vector<Task> tasks;

    const std::string doc = read_text_file(o.annotations);
    nlohmann::json probe;
    try {
        probe = nlohmann::json::parse(doc);
    } catch (const nlohmann::json::exception& e) {
        throw xemap::SchemaError(std::string("invalid JSON: ") + e.what());
    }
    if (probe.is_array()) {
        const xemap::DatasetManifest manifest = xemap::read_manifest(doc);
        for (const auto& entry : manifest.entries) {
            const fs::path ann_path =
                xemap::resolve_manifest_path(o.annotations, entry.annotations);
            const auto load = xemap::read_annotations(read_text_file(ann_path));
            for (std::size_t i = 0; i < load.set.queries.size(); ++i)
                tasks.push_back({entry.id + "_" + std::to_string(i),
                                 load.set.queries[i], load.set.image_width,
                                 load.set.image_height});
        }
    } else {
        const auto load = xemap::read_annotations(doc);
        const std::string id =
            o.id.empty() ? fs::path(o.annotations).stem().string() : o.id;
        for (std::size_t i = 0; i < load.set.queries.size(); ++i)
            tasks.push_back({id + "_" + std::to_string(i), load.set.queries[i],
                             load.set.image_width, load.set.image_height});
    }
    if (tasks.empty()) throw xemap::EmptyInput("nothing to evaluate");

    // load maps up front so a missing prediction fails before any scoring
    std::vector<xemap::CorrelationMap> maps(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i)
        maps[i] = load_prediction(o.pred_dir, tasks[i].id);

    std::vector<xemap::QueryScore> scores(tasks.size());
    xemap::parallel_for(tasks.size(), g.threads, [&](std::size_t i) {
        scores[i] = xemap::evaluate_query(maps[i], tasks[i].query, tasks[i].width,
                                          tasks[i].height, weights, o.tau);
    });

    xemap::MetricReport report;
    report.weights = weights;
    report.tau_frac = o.tau;
    double su = 0.0, as = 0.0, da = 0.0, mi = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        report.queries.push_back({tasks[i].id, scores[i]});
        su += scores[i].r_su;
        as += scores[i].r_as;
        da += scores[i].r_da;
        mi += scores[i].r_mi;
    }
    const double inv = 1.0 / double(tasks.size());
    report.aggregate = {su * inv, as * inv, da * inv, mi * inv};

    write_text_atomic(o.out, xemap::report_json(report).dump(2) + "\n");
    std::cout << "r_su " << format_score(report.aggregate.r_su) << "\n"
              << "r_as " << format_score(report.aggregate.r_as) << "\n"
              << "r_da " << format_score(report.aggregate.r_da) << "\n"
              << "r_mi " << format_score(report.aggregate.r_mi) << "\n";
    return 0;
}

// ------------------------------------------------------------- validate ----

struct ValidateOpts {
    std::string group_a;
    std::string group_b;
    double iou = 0.5;
};

int run_validate(const GlobalOpts&, const ValidateOpts& o) {
    const auto a = xemap::read_annotations(read_text_file(o.group_a));
    const auto b = xemap::read_annotations(read_text_file(o.group_b));
    const xemap::ValidationReport report =
        xemap::validate_annotations(a.set, b.set, o.iou);
    for (std::size_t i = 0; i < report.entries.size(); ++i) {
        const auto& e = report.entries[i];
        std::cout << "query " << i << ": " << (e.pass ? "pass" : "FAIL")
                  << " iou=" << format_score(e.iou)
                  << " area=" << format_score(e.area_fraction);
        for (const auto& r : e.reasons) std::cout << " [" << r << "]";
        std::cout << "\n";
    }
    return report.all_pass ? 0 : 1;
}

// --------------------------------------------------------------- render ----

struct RenderOpts {
    std::string map;
    std::string out;
    std::string image;
    double alpha = 0.5;
};

int run_render(const GlobalOpts&, const RenderOpts& o) {
    if (!(o.alpha >= 0.0 && o.alpha <= 1.0))
        throw xemap::OutOfRange("--alpha must be in [0, 1]");
    const xemap::CorrelationMap map = xemap::load_correlation_map(o.map);

    xemap::PngImage out;
    out.width = map.width;
    out.height = map.height;
    out.channels = 3;
    out.pixels.resize(std::size_t(map.width) * map.height * 3);
    // blue (cold, v=0) to red (hot, v=1)
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const float v = std::clamp(map.values[i], 0.0f, 1.0f);
        const int r = int(std::lround(255.0f * v));
        out.pixels[i * 3] = std::uint8_t(r);
        out.pixels[i * 3 + 1] = 0;
        out.pixels[i * 3 + 2] = std::uint8_t(255 - r);
    }

    if (!o.image.empty()) {
        const xemap::PngImage base = xemap::read_png(o.image);
        if (base.width != map.width || base.height != map.height)
            throw xemap::DimensionMismatch("image dims differ from map dims");
        for (std::size_t i = 0; i < map.values.size(); ++i)
            for (int c = 0; c < 3; ++c) {
                const double b = base.channels == 1 ? base.pixels[i]
                                                    : base.pixels[i * 3 + c];
                const double blended =
                    (1.0 - o.alpha) * b + o.alpha * out.pixels[i * 3 + c];
                out.pixels[i * 3 + c] = std::uint8_t(std::lround(blended));
            }
    }
    write_png_atomic(o.out, out);
    return 0;
}

// ---------------------------------------------------------------- synth ----

struct SynthOpts {
    std::string out_dir;
    std::string dims; // SxDxHxW: tokens x embedding dim x finest level H x W
    int levels = 4;
    int blocks = 1;
    int heads = 4;
    int points = 4;
    int queries = 2;
};

int run_synth(const GlobalOpts& g, const SynthOpts& o) {
    int tokens = 8, dim = 32, finest_h = 64, finest_w = 64;
    if (!o.dims.empty()) {
        std::vector<int> parts;
        std::size_t pos = 0;
        const std::string& s = o.dims;
        while (pos <= s.size()) {
            const std::size_t x = std::min(s.find('x', pos), s.size());
            parts.push_back(parse_int_list(s.substr(pos, x - pos)).at(0));
            pos = x + 1;
        }
        if (parts.size() != 4)
            throw xemap::SchemaError("--dims expects SxDxHxW");
        tokens = parts[0];
        dim = parts[1];
        finest_h = parts[2];
        finest_w = parts[3];
    }
    if (tokens < 1 || dim < 1 || finest_h < 1 || finest_w < 1 || o.levels < 1 ||
        o.blocks < 0 || o.points < 1 || o.queries < 1)
        throw xemap::OutOfRange("synth dims must be positive");
    if (o.heads < 1 || dim % o.heads != 0)
        throw xemap::DimensionMismatch("embedding dim " + std::to_string(dim) +
                                       " not divisible by head count " +
                                       std::to_string(o.heads));

    fs::create_directories(o.out_dir);
    std::mt19937 rng(g.seed);
    auto uniform = [&]() { return double(rng() >> 8) * (1.0 / 16777216.0); };
    auto signed_unit = [&]() { return float(2.0 * uniform() - 1.0); };

    xemap::TensorF32 text =
        xemap::TensorF32::zeros({std::size_t(tokens), std::size_t(dim)});
    for (auto& v : text.data) v = signed_unit();
    write_bytes_atomic(fs::path(o.out_dir) / "text.xten", xemap::write_tensor(text));

    int lh = finest_h, lw = finest_w;
    for (int l = 0; l < o.levels; ++l) {
        xemap::TensorF32 level = xemap::TensorF32::zeros(
            {std::size_t(lh), std::size_t(lw), std::size_t(dim)});
        for (auto& v : level.data) v = signed_unit();
        write_bytes_atomic(fs::path(o.out_dir) / ("level" + std::to_string(l) + ".xten"),
                           xemap::write_tensor(level));
        lh = std::max(1, lh / 2);
        lw = std::max(1, lw / 2);
    }

    xemap::ModelMeta meta;
    meta.dim = std::size_t(dim);
    meta.heads = o.heads;
    meta.blocks = o.blocks;
    meta.points = o.points;
    meta.levels = o.levels;
    write_bytes_atomic(fs::path(o.out_dir) / "weights.xw",
                       xemap::write_weights(xemap::init_weights(g.seed, meta), meta));

    // annotation over an image 4x the finest level, star-shaped fat polygons
    const int img_w = finest_w * 4, img_h = finest_h * 4;
    const double min_side = std::min(img_w, img_h);
    xemap::AnnotationSet set;
    set.image_width = img_w;
    set.image_height = img_h;
    auto make_polygon = [&](double cx, double cy) {
        xemap::Polygon poly;
        const double radius = min_side * (0.08 + 0.10 * uniform());
        const int k = 5 + int(rng() % 4);
        for (int t = 0; t < k; ++t) {
            const double jitter = (uniform() - 0.5) * 0.6 / k;
            const double angle = 2.0 * 3.14159265358979323846 * (t + jitter) / k;
            const double rr = radius * (0.8 + 0.4 * uniform());
            poly.vertices.push_back({float(cx + rr * std::cos(angle)),
                                     float(cy + rr * std::sin(angle))});
        }
        return poly;
    };
    for (int q = 0; q < o.queries; ++q) {
        xemap::QueryRecord rec;
        rec.text = "synthetic query " + std::to_string(q);
        const int regions = (q % 2 == 1) ? 2 : 1;
        rec.multi_ref = regions > 1;
        for (int r = 0; r < regions; ++r) {
            const double cx = img_w * (0.25 + 0.5 * uniform());
            const double cy = img_h * (0.25 + 0.5 * uniform());
            rec.regions.push_back(make_polygon(cx, cy));
        }
        set.queries.push_back(std::move(rec));
    }
    write_text_atomic(fs::path(o.out_dir) / "annotation.json",
                      xemap::write_annotations(set));
    note(g, "fixtures written to " + o.out_dir);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"polygon-referring correlation maps: compile, infer, evaluate"};
    app.require_subcommand(1);
    GlobalOpts g;
    app.add_option("--threads", g.threads, "worker threads for batch stages")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "seed for weight init and fixtures");
    app.add_flag("--verbose", g.verbose, "progress notes on the error stream");

    McmgOpts mo;
    auto* mcmg = app.add_subcommand("mcmg", "compile annotations into soft maps");
    mcmg->fallthrough();
    mcmg->add_option("annotations", mo.annotations, "annotation JSON file")->required();
    mcmg->add_option("-o,--out-dir", mo.out_dir, "output directory")->required();
    mcmg->add_option("--levels", mo.levels, "grid cell sizes, comma separated");
    mcmg->add_option("--sigma", mo.sigma, "gaussian sigma (default: finest cell / 2)");
    mcmg->add_option("--radius", mo.radius, "gaussian kernel radius (default: ceil(3 sigma))");
    mcmg->add_option("--out-dims", mo.out_dims, "resize output maps to WxH");
    mcmg->add_option("--format", mo.format, "png | xten | both")
        ->check(CLI::IsMember({"png", "xten", "both"}));
    mcmg->add_option("--id", mo.id, "image id for output names (default: file stem)");

    InferOpts io;
    auto* infer = app.add_subcommand("infer", "embeddings to correlation map");
    infer->fallthrough();
    infer->add_option("--features", io.features, "per-level feature tensors, finest first")
        ->required()
        ->expected(-1);
    infer->add_option("--text", io.text, "text embedding tensor (S, D)")->required();
    infer->add_option("--weights", io.weights, "weights container (default: seeded init)");
    infer->add_option("-o,--out", io.out, "output map (XTEN f32)")->required();
    infer->add_option("--png", io.png, "also write a quantized PNG map");
    infer->add_option("--pool", io.pool, "average | max | first")
        ->check(CLI::IsMember({"average", "avg", "max", "first"}));
    infer->add_option("--out-dims", io.out_dims, "output WxH (default: finest level)");
    infer->add_option("--blocks", io.blocks, "fusion blocks for seeded init");
    infer->add_option("--heads", io.heads, "attention heads for seeded init");
    infer->add_option("--points", io.points, "deformable sampling points per level");

    EvalOpts eo;
    auto* eval = app.add_subcommand("eval", "score prediction maps against annotations");
    eval->fallthrough();
    eval->add_option("--pred", eo.pred_dir, "directory of <id>_<i>.png|.xten maps")
        ->required();
    eval->add_option("--annotations", eo.annotations, "annotation file or manifest")
        ->required();
    eval->add_option("-o,--out", eo.out, "report JSON path")->required();
    eval->add_option("--weights", eo.weights, "three mixing weights a,b,c");
    eval->add_option("--tau", eo.tau, "candidate threshold fraction of map max");
    eval->add_option("--id", eo.id, "image id override (single-file mode)");

    ValidateOpts vo;
    auto* validate = app.add_subcommand("validate", "cross-check two annotation groups");
    validate->fallthrough();
    validate->add_option("group-a", vo.group_a, "candidate annotation file")->required();
    validate->add_option("group-b", vo.group_b, "reference annotation file")->required();
    validate->add_option("--iou", vo.iou, "IoU threshold (strictly greater passes)");

    RenderOpts ro;
    auto* render = app.add_subcommand("render", "map to blue-red overlay PNG");
    render->fallthrough();
    render->add_option("map", ro.map, "correlation map (PNG or XTEN)")->required();
    render->add_option("-o,--out", ro.out, "output PNG")->required();
    render->add_option("--image", ro.image, "blend over this PNG (gray or RGB)");
    render->add_option("--alpha", ro.alpha, "overlay opacity in [0, 1]");

    SynthOpts so;
    auto* synth = app.add_subcommand("synth", "seeded synthetic fixtures");
    synth->fallthrough();
    synth->add_option("-o,--out-dir", so.out_dir, "output directory")->required();
    synth->add_option("--dims", so.dims, "SxDxHxW (tokens, dim, finest level)");
    synth->add_option("--levels", so.levels, "multiscale level count");
    synth->add_option("--blocks", so.blocks, "fusion block count");
    synth->add_option("--heads", so.heads, "attention head count");
    synth->add_option("--points", so.points, "deformable sampling points");
    synth->add_option("--queries", so.queries, "annotation query count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*mcmg) return run_mcmg(g, mo);
        if (*infer) return run_infer(g, io);
        if (*eval) return run_eval(g, eo);
        if (*validate) return run_validate(g, vo);
        if (*render) return run_render(g, ro);
        if (*synth) return run_synth(g, so);
    } catch (const xemap::InvalidWeights& e) {
        std::cerr << "xemap: " << e.what() << "\n";
        return 4;
    } catch (const xemap::WriteFailure& e) {
        std::cerr << "xemap: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "xemap: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
