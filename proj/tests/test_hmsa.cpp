#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "xemap/hmsa.hpp"

#include "oracles.hpp"

using namespace xemap;

namespace {

std::vector<float> random_values(std::mt19937& rng, std::size_t n,
                                 float lo = -1.0f, float hi = 1.0f) {
    std::vector<float> out(n);
    for (auto& v : out) v = lo + (hi - lo) * float(rng() % 10001) / 10000.0f;
    return out;
}

CorrelationMap random_map(std::mt19937& rng, int w, int h) {
    CorrelationMap m(w, h);
    m.values = random_values(rng, m.size(), 0.0f, 1.0f);
    return m;
}

std::vector<double> widen(const std::vector<float>& v) {
    return std::vector<double>(v.begin(), v.end());
}

// Every cell carries the same unit feature vector.
FlatImageEmbedding uniform_feature_image(const std::vector<float>& cell,
                                         std::vector<std::array<int, 2>> dims) {
    FlatImageEmbedding e;
    e.dim = cell.size();
    e.level_dims = std::move(dims);
    for (auto [h, w] : e.level_dims)
        for (int i = 0; i < h * w; ++i)
            e.data.insert(e.data.end(), cell.begin(), cell.end());
    return e;
}

} // namespace

TEST_CASE("l2 normalization") {
    const std::vector<float> v{3.0f, 4.0f};
    const auto n = l2_normalize(v);
    CHECK(n[0] == Catch::Approx(0.6).margin(1e-7));
    CHECK(n[1] == Catch::Approx(0.8).margin(1e-7));

    const std::vector<float> basis{0.0f, 2.0f, 0.0f};
    CHECK(l2_normalize(basis) == std::vector<float>{0.0f, 1.0f, 0.0f});

    const std::vector<float> zero(4, 0.0f);
    CHECK(l2_normalize(zero) == zero);

    std::mt19937 rng(1);
    const auto r = random_values(rng, 16);
    const auto rn = l2_normalize(r);
    double sq = 0.0;
    for (float x : rn) sq += double(x) * x;
    CHECK(sq == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("per-location feature normalization") {
    std::mt19937 rng(2);
    TensorF32 t({3, 2, 4}, random_values(rng, 24));
    t.data[0] = t.data[1] = t.data[2] = t.data[3] = 0.0f; // one zero cell stays zero
    const TensorF32 n = l2_normalize_features(t);
    REQUIRE(n.shape == t.shape);
    for (std::size_t i = 0; i < 6; ++i) {
        std::span<const float> cell(t.data.data() + i * 4, 4);
        const auto ref = l2_normalize(cell);
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(n.data[i * 4 + c] == ref[c]);
    }
    CHECK_THROWS_AS(l2_normalize_features(TensorF32({2, 4}, std::vector<float>(8, 0.0f))),
                    DimensionMismatch);
}

TEST_CASE("correlation of normalized features against the sentence vector") {
    const std::vector<float> e0{1.0f, 0.0f, 0.0f};
    const std::vector<float> e1{0.0f, 1.0f, 0.0f};
    TensorF32 f({1, 3, 3}, {1.0f, 0.0f, 0.0f,   // aligned
                            0.0f, 1.0f, 0.0f,   // orthogonal
                            -1.0f, 0.0f, 0.0f}); // opposed
    const CorrelationMap m = correlation_level(f, e0);
    REQUIRE(m.width == 3);
    REQUIRE(m.height == 1);
    CHECK(m.values[0] == 1.0f);
    CHECK(m.values[1] == 0.0f);
    CHECK(m.values[2] == -1.0f);

    CHECK_THROWS_AS(correlation_level(f, std::span<const float>(e0.data(), 2)),
                    DimensionMismatch);
    CHECK_THROWS_AS(correlation_level(TensorF32({3, 3}, std::vector<float>(9, 0.0f)), e1),
                    DimensionMismatch);
}

TEST_CASE("rescale maps [-1,1] onto [0,1]") {
    CorrelationMap m(3, 1);
    m.values = {1.0f, -1.0f, 0.0f};
    const CorrelationMap r = rescale_unit(m);
    CHECK(r.values[0] == 1.0f);
    CHECK(r.values[1] == 0.0f);
    CHECK(r.values[2] == 0.5f);

    CorrelationMap slack(1, 1);
    slack.values = {1.0f + 5e-7f}; // inside the tolerance band, clamps
    CHECK(rescale_unit(slack).values[0] == 1.0f);
    slack.values = {-1.0f - 5e-7f};
    CHECK(rescale_unit(slack).values[0] == 0.0f);

    CorrelationMap bad(1, 1);
    bad.values = {1.1f};
    CHECK_THROWS_AS(rescale_unit(bad), OutOfRange);
    bad.values = {-1.1f};
    CHECK_THROWS_AS(rescale_unit(bad), OutOfRange);

    std::mt19937 rng(3);
    CorrelationMap rnd(9, 5);
    rnd.values = random_values(rng, rnd.size());
    const CorrelationMap out = rescale_unit(rnd);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        CHECK(2.0f * out.values[i] - 1.0f ==
              Catch::Approx(rnd.values[i]).margin(1e-6));
}

TEST_CASE("bilinear upsample identity and constants") {
    std::mt19937 rng(4);
    const CorrelationMap src = random_map(rng, 7, 5);
    const CorrelationMap same = bilinear_upsample(src, 7, 5);
    CHECK(same.values == src.values);

    const CorrelationMap flat(6, 4, 0.375f);
    const CorrelationMap up = bilinear_upsample(flat, 17, 9);
    for (float v : up.values) REQUIRE(v == 0.375f);
}

TEST_CASE("bilinear upsample of a 2x2 ramp") {
    CorrelationMap src(2, 2);
    src.values = {0.0f, 1.0f, 2.0f, 3.0f};
    const CorrelationMap up = bilinear_upsample(src, 4, 4);
    REQUIRE(up.width == 4);
    CHECK(up.values[0] == 0.0f);
    CHECK(up.values[1] == 0.25f);
    CHECK(up.values[2] == 0.75f);
    CHECK(up.values[3] == 1.0f);
    // corners reproduce the source corners
    CHECK(up.at(0, 3) == 2.0f);
    CHECK(up.at(3, 3) == 3.0f);
}

TEST_CASE("bilinear resampling matches the oracle both ways") {
    std::mt19937 rng(5);
    SECTION("upsample") {
        const CorrelationMap src = random_map(rng, 5, 3);
        const CorrelationMap up = bilinear_upsample(src, 11, 7);
        const auto ref = oracle::bilinear_resize(widen(src.values), 5, 3, 11, 7);
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(up.values[i] == Catch::Approx(ref[i]).margin(1e-6));
    }
    SECTION("downsample") {
        const CorrelationMap src = random_map(rng, 8, 8);
        const CorrelationMap down = bilinear_upsample(src, 3, 3);
        const auto ref = oracle::bilinear_resize(widen(src.values), 8, 8, 3, 3);
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(down.values[i] == Catch::Approx(ref[i]).margin(1e-6));
    }
    SECTION("outputs stay inside the source range") {
        const CorrelationMap src = random_map(rng, 4, 6);
        const auto [lo, hi] = std::minmax_element(src.values.begin(), src.values.end());
        const CorrelationMap up = bilinear_upsample(src, 13, 10);
        for (float v : up.values) {
            REQUIRE(v >= *lo - 1e-6f);
            REQUIRE(v <= *hi + 1e-6f);
        }
    }
    CHECK_THROWS_AS(bilinear_upsample(CorrelationMap(2, 2), 0, 4), DimensionMismatch);
}

TEST_CASE("level integration averages pixelwise") {
    CorrelationMap a(2, 2, 0.0f), b(2, 2, 1.0f);
    const CorrelationMap m = integrate_levels(std::vector<CorrelationMap>{a, b});
    for (float v : m.values) CHECK(v == 0.5f);

    std::mt19937 rng(6);
    std::vector<CorrelationMap> three;
    for (int i = 0; i < 3; ++i) three.push_back(random_map(rng, 4, 3));
    const CorrelationMap avg = integrate_levels(three);
    for (std::size_t i = 0; i < avg.values.size(); ++i) {
        const double want =
            (double(three[0].values[i]) + three[1].values[i] + three[2].values[i]) / 3.0;
        CHECK(avg.values[i] == Catch::Approx(want).margin(1e-7));
    }

    CHECK_THROWS_AS(integrate_levels(std::vector<CorrelationMap>{}), EmptyInput);
    CHECK_THROWS_AS(
        integrate_levels(std::vector<CorrelationMap>{CorrelationMap(2, 2),
                                                     CorrelationMap(3, 2)}),
        DimensionMismatch);
}

TEST_CASE("forward pass hits the exact extremes on aligned features") {
    const std::vector<float> e0{1.0f, 0.0f, 0.0f, 0.0f};
    const std::vector<float> e1{0.0f, 1.0f, 0.0f, 0.0f};
    const FlatImageEmbedding image =
        uniform_feature_image(e0, {{8, 8}, {4, 4}, {2, 2}, {1, 1}});

    TextEmbeddingSequence aligned(1, 4);
    aligned.data = e0;
    const CorrelationMap hit = hmsa_forward(image, aligned, 32, 32);
    for (float v : hit.values) REQUIRE(v == 1.0f);

    TextEmbeddingSequence ortho(1, 4);
    ortho.data = e1;
    const CorrelationMap half = hmsa_forward(image, ortho, 32, 32);
    for (float v : half.values) REQUIRE(v == 0.5f);
}

TEST_CASE("forward pass matches the dense oracle") {
    std::mt19937 rng(7);
    const std::size_t d = 8;
    const std::vector<std::array<int, 2>> dims{{16, 16}, {8, 8}, {4, 4}, {2, 2}};
    FlatImageEmbedding image;
    image.dim = d;
    image.level_dims = dims;
    std::size_t rows = 0;
    for (auto [h, w] : dims) rows += std::size_t(h) * w;
    image.data = random_values(rng, rows * d);

    TextEmbeddingSequence text(3, d);
    text.data = random_values(rng, 3 * d);

    std::vector<std::vector<float>> levels;
    std::vector<oracle::LevelDims> odims;
    std::size_t off = 0;
    for (auto [h, w] : dims) {
        const std::size_t n = std::size_t(h) * w * d;
        levels.emplace_back(image.data.begin() + off, image.data.begin() + off + n);
        odims.push_back({h, w});
        off += n;
    }

    for (auto [mode, omode] :
         {std::pair{PoolMode::Average, oracle::Pool::Average},
          std::pair{PoolMode::Max, oracle::Pool::Max},
          std::pair{PoolMode::First, oracle::Pool::First}}) {
        const CorrelationMap out = hmsa_forward(image, text, 64, 64, mode);
        const auto ref =
            oracle::hmsa_dense(text.data, 3, d, levels, odims, 64, 64, omode);
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(out.values[i] == Catch::Approx(ref[i]).margin(1e-6));
        for (float v : out.values) {
            REQUIRE(v >= 0.0f);
            REQUIRE(v <= 1.0f);
        }
    }
}

TEST_CASE("forward pass handles non-square levels") {
    std::mt19937 rng(8);
    const std::size_t d = 4;
    const std::vector<std::array<int, 2>> dims{{6, 4}, {3, 2}, {2, 1}};
    FlatImageEmbedding image;
    image.dim = d;
    image.level_dims = dims;
    image.data = random_values(rng, (24 + 6 + 2) * d);
    TextEmbeddingSequence text(2, d);
    text.data = random_values(rng, 2 * d);

    const CorrelationMap out = hmsa_forward(image, text, 16, 12);
    REQUIRE(out.width == 16);
    REQUIRE(out.height == 12);

    std::vector<std::vector<float>> levels;
    std::vector<oracle::LevelDims> odims;
    std::size_t off = 0;
    for (auto [h, w] : dims) {
        const std::size_t n = std::size_t(h) * w * d;
        levels.emplace_back(image.data.begin() + off, image.data.begin() + off + n);
        odims.push_back({h, w});
        off += n;
    }
    const auto ref = oracle::hmsa_dense(text.data, 2, d, levels, odims, 16, 12,
                                        oracle::Pool::Average);
    for (std::size_t i = 0; i < ref.size(); ++i)
        REQUIRE(out.values[i] == Catch::Approx(ref[i]).margin(1e-6));
}

TEST_CASE("forward pass is invariant to positive rescaling of either side") {
    std::mt19937 rng(9);
    const std::size_t d = 6;
    FlatImageEmbedding image;
    image.dim = d;
    image.level_dims = {{4, 4}, {2, 2}};
    image.data = random_values(rng, 20 * d);
    TextEmbeddingSequence text(2, d);
    text.data = random_values(rng, 2 * d);

    const CorrelationMap base = hmsa_forward(image, text, 8, 8);

    FlatImageEmbedding scaled_img = image;
    for (auto& v : scaled_img.data) v *= 3.7f;
    TextEmbeddingSequence scaled_text = text;
    for (auto& v : scaled_text.data) v *= 0.25f;
    const CorrelationMap out = hmsa_forward(scaled_img, scaled_text, 8, 8);
    for (std::size_t i = 0; i < base.values.size(); ++i)
        REQUIRE(out.values[i] == Catch::Approx(base.values[i]).margin(1e-6));
}

TEST_CASE("forward pass pools a single token identically in every mode") {
    std::mt19937 rng(10);
    const std::size_t d = 4;
    FlatImageEmbedding image;
    image.dim = d;
    image.level_dims = {{2, 2}};
    image.data = random_values(rng, 4 * d);
    TextEmbeddingSequence text(1, d);
    text.data = random_values(rng, d);

    const CorrelationMap a = hmsa_forward(image, text, 4, 4, PoolMode::Average);
    const CorrelationMap m = hmsa_forward(image, text, 4, 4, PoolMode::Max);
    const CorrelationMap f = hmsa_forward(image, text, 4, 4, PoolMode::First);
    CHECK(a.values == m.values);
    CHECK(a.values == f.values);
}

TEST_CASE("forward pass validates its inputs") {
    FlatImageEmbedding image;
    image.dim = 4;
    image.level_dims = {{2, 2}};
    image.data.assign(16, 0.1f);
    TextEmbeddingSequence text(1, 3);
    text.data.assign(3, 0.5f);
    CHECK_THROWS_AS(hmsa_forward(image, text, 8, 8), DimensionMismatch);

    TextEmbeddingSequence ok(1, 4);
    ok.data.assign(4, 0.5f);
    CHECK_THROWS_AS(hmsa_forward(image, ok, 0, 8), OutOfRange);
    CHECK_THROWS_AS(hmsa_forward(image, ok, 8, -1), OutOfRange);
}

TEST_CASE("map and tensor views round trip") {
    std::mt19937 rng(11);
    const CorrelationMap m = random_map(rng, 5, 3);
    const TensorF32 t = map_to_tensor(m);
    REQUIRE(t.shape == std::vector<std::size_t>{3, 5});
    const CorrelationMap back = map_from_tensor(t);
    CHECK(back.width == m.width);
    CHECK(back.height == m.height);
    CHECK(back.values == m.values);
    CHECK_THROWS_AS(map_from_tensor(TensorF32({2, 2, 2}, std::vector<float>(8, 0.0f))),
                    DimensionMismatch);
    CHECK_THROWS_AS(dequantize_u8(TensorU8({4}, std::vector<std::uint8_t>(4, 0))),
                    DimensionMismatch);
}

TEST_CASE("l1 distance between maps") {
    CorrelationMap a(2, 2, 0.5f), b(2, 2, 0.5f);
    CHECK(l1_loss(a, b) == 0.0);

    b.values = {0.75f, 0.25f, 0.75f, 0.25f}; // each pixel off by 0.25
    CHECK(l1_loss(a, b) == 1.0);
    CHECK(l1_loss_mean(a, b) == 0.25);
    CHECK(l1_loss(b, a) == l1_loss(a, b));

    std::mt19937 rng(12);
    const CorrelationMap x = random_map(rng, 6, 4);
    const CorrelationMap y = random_map(rng, 6, 4);
    const CorrelationMap z = random_map(rng, 6, 4);
    double manual = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i)
        manual += std::abs(double(x.values[i]) - double(y.values[i]));
    CHECK(l1_loss(x, y) == Catch::Approx(manual).margin(1e-9));
    CHECK(l1_loss(x, z) <= l1_loss(x, y) + l1_loss(y, z) + 1e-9);
    CHECK(l1_loss_mean(x, y) == Catch::Approx(l1_loss(x, y) / 24.0).margin(1e-12));

    CHECK_THROWS_AS(l1_loss(x, CorrelationMap(4, 6)), DimensionMismatch);
}
