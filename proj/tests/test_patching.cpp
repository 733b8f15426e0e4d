#include <cmath>
#include <vector>

#include <doctest.h>

#include "cog3d/patching.hpp"
#include "cog3d/rng.hpp"

using namespace cog3d;

namespace {

FrameBundle make_frame(uint32_t h, uint32_t w, uint32_t df, uint32_t dg, uint32_t patch) {
    FrameBundle f;
    f.height = h;
    f.width = w;
    f.df = df;
    f.dg = dg;
    f.timestep = 1;
    f.patch_size = patch;
    f.pointmap.assign(std::size_t(h) * w * 3, 0.0f);
    f.semantic.assign(std::size_t(h) * w * df, 0.0f);
    f.geometric.assign(std::size_t(h) * w * dg, 0.0f);
    f.valid.assign(std::size_t(h) * w, 1);
    return f;
}

FrameBundle random_frame(Rng& rng, uint32_t h, uint32_t w, uint32_t df, uint32_t dg,
                         uint32_t patch, double invalid_rate = 0.2) {
    FrameBundle f = make_frame(h, w, df, dg, patch);
    for (float& v : f.pointmap) v = rng.uniform_f(-4, 4);
    for (float& v : f.semantic) v = rng.uniform_f(-2, 2);
    for (float& v : f.geometric) v = rng.uniform_f(-2, 2);
    for (auto& m : f.valid) m = rng.next_double() < invalid_rate ? 0 : 1;
    return f;
}

// Plain per-pixel double-loop means, the pooling oracle.
struct PatchMeans {
    bool any_valid = false;
    std::vector<double> position{0.0, 0.0, 0.0};
    std::vector<double> semantic;
    std::vector<double> geometric;
};

PatchMeans brute_force_patch(const FrameBundle& f, uint32_t u, uint32_t v) {
    PatchMeans out;
    out.semantic.assign(f.df, 0.0);
    out.geometric.assign(f.dg, 0.0);
    std::size_t n = 0;
    for (uint32_t i = u * f.patch_size; i < (u + 1) * f.patch_size; ++i)
        for (uint32_t j = v * f.patch_size; j < (v + 1) * f.patch_size; ++j) {
            const std::size_t px = std::size_t(i) * f.width + j;
            if (!f.valid[px]) continue;
            ++n;
            for (int c = 0; c < 3; ++c) out.position[c] += double(f.pointmap[px * 3 + c]);
            for (uint32_t c = 0; c < f.df; ++c) out.semantic[c] += double(f.semantic[px * f.df + c]);
            for (uint32_t c = 0; c < f.dg; ++c)
                out.geometric[c] += double(f.geometric[px * f.dg + c]);
        }
    if (n == 0) return out;
    out.any_valid = true;
    for (auto& x : out.position) x /= double(n);
    for (auto& x : out.semantic) x /= double(n);
    for (auto& x : out.geometric) x /= double(n);
    return out;
}

}  // namespace

TEST_CASE("512x384 at patch 32 yields 192 tokens") {
    FrameBundle f = make_frame(384, 512, 4, 4, 32);
    const PatchTokenSet set = pool_patches(f);
    CHECK(set.size() == 192);
    CHECK(set.grid_h == 12);
    CHECK(set.grid_w == 16);
}

TEST_CASE("constant pointmap pools to the constant") {
    FrameBundle f = make_frame(8, 8, 2, 2, 4);
    for (std::size_t px = 0; px < f.pixel_count(); ++px) {
        f.pointmap[px * 3 + 0] = 1.5f;
        f.pointmap[px * 3 + 1] = -2.0f;
        f.pointmap[px * 3 + 2] = 0.25f;
    }
    const PatchTokenSet set = pool_patches(f);
    REQUIRE(set.size() == 4);
    for (const Vec3f& p : set.positions) {
        CHECK(p.x == 1.5f);
        CHECK(p.y == -2.0f);
        CHECK(p.z == 0.25f);
    }
}

TEST_CASE("2x2 patch position is the hand mean") {
    FrameBundle f = make_frame(2, 2, 1, 1, 2);
    const float pts[4][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    for (int px = 0; px < 4; ++px)
        for (int c = 0; c < 3; ++c) f.pointmap[px * 3 + c] = pts[px][c];
    const PatchTokenSet set = pool_patches(f);
    REQUIRE(set.size() == 1);
    CHECK(set.positions[0].x == 0.5f);
    CHECK(set.positions[0].y == 0.5f);
    CHECK(set.positions[0].z == 0.0f);
    CHECK(set.coords[0] == std::pair<uint16_t, uint16_t>{0, 0});
}

TEST_CASE("pooling matches the per-pixel oracle within 1e-6 relative") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const uint32_t patch = rng.next_below(2) ? 4 : 8;
        const uint32_t h = patch * (1 + uint32_t(rng.next_below(4)));
        const uint32_t w = patch * (1 + uint32_t(rng.next_below(4)));
        const uint32_t df = 1 + uint32_t(rng.next_below(9));
        const uint32_t dg = 1 + uint32_t(rng.next_below(5));
        FrameBundle f = random_frame(rng, h, w, df, dg, patch);
        const PatchTokenSet set = pool_patches(f);

        std::size_t token = 0;
        for (uint32_t u = 0; u < h / patch; ++u)
            for (uint32_t v = 0; v < w / patch; ++v) {
                const PatchMeans want = brute_force_patch(f, u, v);
                if (!want.any_valid) continue;
                REQUIRE(token < set.size());
                CHECK(set.coords[token] == std::pair<uint16_t, uint16_t>{uint16_t(u), uint16_t(v)});
                const Vec3f p = set.positions[token];
                CHECK(double(p.x) == doctest::Approx(want.position[0]).epsilon(1e-6));
                CHECK(double(p.y) == doctest::Approx(want.position[1]).epsilon(1e-6));
                CHECK(double(p.z) == doctest::Approx(want.position[2]).epsilon(1e-6));
                const auto sem = set.semantic_row(token);
                for (uint32_t c = 0; c < df; ++c)
                    CHECK(double(sem[c]) == doctest::Approx(want.semantic[c]).epsilon(1e-6));
                const auto geo = set.geometric_row(token);
                for (uint32_t c = 0; c < dg; ++c)
                    CHECK(double(geo[c]) == doctest::Approx(want.geometric[c]).epsilon(1e-6));
                ++token;
            }
        CHECK(token == set.size());
    }
}

TEST_CASE("all-true mask equals unmasked pooling exactly") {
    Rng rng(43);
    FrameBundle f = random_frame(rng, 16, 16, 3, 2, 8, 0.0);
    FrameBundle g = f;
    std::fill(g.valid.begin(), g.valid.end(), 1);
    const PatchTokenSet a = pool_patches(f);
    const PatchTokenSet b = pool_patches(g);
    CHECK(a.semantic == b.semantic);
    CHECK(a.geometric == b.geometric);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.positions[i] == b.positions[i]);
}

TEST_CASE("zero-valid patches are dropped") {
    FrameBundle f = make_frame(8, 8, 1, 1, 4);
    // Invalidate the top-left patch entirely.
    for (uint32_t i = 0; i < 4; ++i)
        for (uint32_t j = 0; j < 4; ++j) f.valid[i * 8 + j] = 0;
    const PatchTokenSet set = pool_patches(f);
    CHECK(set.size() == 3);
    for (const auto& c : set.coords) CHECK(c != std::pair<uint16_t, uint16_t>{0, 0});

    std::fill(f.valid.begin(), f.valid.end(), 0);
    CHECK(pool_patches(f).size() == 0);
}

TEST_CASE("non-divisible frame raises InvalidFrame") {
    FrameBundle f = make_frame(8, 8, 1, 1, 3);
    CHECK_THROWS_AS(pool_patches(f), InvalidFrame);
    f.patch_size = 0;
    CHECK_THROWS_AS(pool_patches(f), InvalidFrame);
}

TEST_CASE("validate catches NaN at valid pixels only") {
    FrameBundle f = make_frame(4, 4, 1, 1, 4);
    f.semantic[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(f.validate(), InvalidFrame);
    f.valid[5] = 0;
    CHECK_NOTHROW(f.validate());
}

TEST_CASE("geometry encoder: masked mean on constant input") {
    FrameBundle f = make_frame(4, 4, 1, 2, 4);
    for (std::size_t px = 0; px < 16; ++px) {
        f.geometric[px * 2 + 0] = 3.5f;
        f.geometric[px * 2 + 1] = -1.0f;
    }
    const auto g = encode_geometry(f, GeomPatchEncoder::masked_mean());
    REQUIRE(g.size() == 2);
    CHECK(g[0] == 3.5f);
    CHECK(g[1] == -1.0f);
}

TEST_CASE("geometry encoder: strided max is component-wise") {
    // One 2x2 patch whose two valid pixels carry [1,0] and [0,2].
    FrameBundle f = make_frame(2, 2, 1, 2, 2);
    f.geometric = {1.0f, 0.0f, 0.0f, 2.0f, 0.0f, 0.0f, 0.0f, 0.0f};
    f.valid = {1, 1, 0, 0};
    const auto g = encode_geometry(f, GeomPatchEncoder::strided_max());
    REQUIRE(g.size() == 2);
    CHECK(g[0] == 1.0f);
    CHECK(g[1] == 2.0f);
}

TEST_CASE("geometry encoder: external identity equals masked mean exactly") {
    Rng rng(44);
    FrameBundle f = random_frame(rng, 8, 8, 1, 4, 4);
    std::vector<float> ident(16, 0.0f);
    for (int i = 0; i < 4; ++i) ident[i * 4 + i] = 1.0f;
    const auto mean = encode_geometry(f, GeomPatchEncoder::masked_mean());
    const auto ext = encode_geometry(f, GeomPatchEncoder::external(ident, {0, 0, 0, 0}));
    CHECK(mean == ext);
}

TEST_CASE("geometry encoder: weight shape mismatch raises ConfigError") {
    FrameBundle f = make_frame(4, 4, 1, 3, 4);
    CHECK_THROWS_AS(encode_geometry(f, GeomPatchEncoder::external({1.0f}, {0.0f})), ConfigError);
}

TEST_CASE("token count never exceeds the grid and coords are unique row-major") {
    Rng rng(45);
    for (int trial = 0; trial < 10; ++trial) {
        FrameBundle f = random_frame(rng, 16, 24, 2, 2, 8, 0.6);
        const PatchTokenSet set = pool_patches(f);
        CHECK(set.size() <= std::size_t(set.grid_h) * set.grid_w);
        for (std::size_t i = 1; i < set.coords.size(); ++i)
            CHECK(std::size_t(set.coords[i - 1].first) * set.grid_w + set.coords[i - 1].second <
                  std::size_t(set.coords[i].first) * set.grid_w + set.coords[i].second);
    }
}
